#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "quanto/black_scholes.hpp"
#include "quanto/errors.hpp"
#include "quanto/heston_sim.hpp"
#include "quanto/kernel_copula.hpp"
#include "quanto/marginals.hpp"
#include "quanto/market_model.hpp"
#include "quanto/parallel.hpp"
#include "quanto/stats.hpp"

namespace quanto {

/// Domestic-currency value; std_error is 0 for closed forms.
struct PriceResult {
    double price = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
};

/// Closed-form quanto call: q_fix * BS(s0 e^{-T(r - rf + rho(S,Q) s_atm q_atm)}, K,
/// vol_sf_strike, T, r) with rho(S,Q) = -rho(S,1/Q). The drift correction uses
/// the at-the-money vols only; the Black-Scholes slot takes the at-strike vol.
inline PriceResult price_practitioner(const MarketConfig& mkt, const ContractSpec& contract, double vol_sf_atm,
                                      double vol_q_atm, double vol_sf_strike) {
    for (auto [v, name] : {std::pair{vol_sf_atm, "vol_sf_atm"}, {vol_q_atm, "vol_q_atm"}, {vol_sf_strike, "vol_sf_strike"}}) {
        detail::require_finite(v, name);
        detail::require(v >= 0.0, std::string(name) + " must be >= 0");
    }
    const double T = contract.maturity();
    const double rho_sq = rho_domestic_from_foreign(mkt.rho_sf_qinv());
    const double adjusted_spot = mkt.s0() * std::exp(-T * (mkt.r() - mkt.rf() + rho_sq * vol_sf_atm * vol_q_atm));
    const double call = bs_call({adjusted_spot, contract.strike(), vol_sf_strike, T, mkt.r()});
    return {mkt.q_fix() * call, 0.0, 0};
}

namespace detail {

inline void require_matching_market(const MarketConfig& mkt, const DswParams& params) {
    params.validate();
    require(params.rho_cross == mkt.rho_sf_qinv() && params.r == mkt.r() && params.rf == mkt.rf(),
            "DSW parameters disagree with the market config (rho_cross, r, rf)");
}

/// Mean and standard error of scale * y over the samples.
inline PriceResult scaled_mean(std::span<const double> y, double scale) {
    const auto me = stats::mean_and_error(y);
    return {scale * me.mean, scale * me.std_error, y.size()};
}

/// One result per strike from pairs (s_f_T, qinv_T) under the foreign
/// measure: Q(0) e^{-rf T} mean(qinv_T * payoff).
inline std::vector<PriceResult> foreign_measure_prices(const MarketConfig& mkt, std::span<const double> s_f,
                                                       std::span<const double> q_inv, std::span<const double> strikes,
                                                       double maturity) {
    const double scale = mkt.q0() * std::exp(-mkt.rf() * maturity);
    std::vector<PriceResult> out;
    out.reserve(strikes.size());
    std::vector<double> y(s_f.size());
    for (double K : strikes) {
        ContractSpec(K, maturity);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = q_inv[i] * quanto_payoff(s_f[i], K, mkt.q_fix());
        out.push_back(scaled_mean(y, scale));
    }
    return out;
}

}  // namespace detail

/// Joint-Heston price on every strike, all strikes sharing one path set.
inline std::vector<PriceResult> price_dsw(const MarketConfig& mkt, std::span<const double> strikes, double maturity,
                                          const DswParams& params, const SimGrid& grid) {
    detail::require_matching_market(mkt, params);
    const auto joint = simulate_dsw_joint(mkt.s0(), mkt.qinv0(), params, maturity, grid);
    std::vector<double> s_f(joint.size()), q_inv(joint.size());
    for (std::size_t i = 0; i < joint.size(); ++i) {
        s_f[i] = joint[i].s_f;
        q_inv[i] = joint[i].q_inv;
    }
    return detail::foreign_measure_prices(mkt, s_f, q_inv, strikes, maturity);
}

inline PriceResult price_dsw(const MarketConfig& mkt, const ContractSpec& contract, const DswParams& params,
                             const SimGrid& grid) {
    const double k[] = {contract.strike()};
    return price_dsw(mkt, k, contract.maturity(), params, grid).front();
}

/// Copula price on every strike from one set of n_draws copula draws mapped
/// through the marginal quantiles.
inline std::vector<PriceResult> price_copula(const MarketConfig& mkt, std::span<const double> strikes, double maturity,
                                             const EmpiricalMarginal& marg_sf, const EmpiricalMarginal& marg_qinv,
                                             const KernelCopula& cop, std::size_t n_draws, std::uint64_t seed) {
    detail::require(n_draws >= 1, "n_draws must be >= 1");
    detail::require_finite(maturity, "maturity");
    detail::require(maturity > 0.0, "maturity must be positive");
    const auto draws = cop.sample(n_draws, seed);
    std::vector<double> s_f(n_draws), q_inv(n_draws);
    parallel_for(n_draws, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            s_f[i] = marg_sf.quantile(draws[i][0]);
            q_inv[i] = marg_qinv.quantile(draws[i][1]);
        }
    });
    return detail::foreign_measure_prices(mkt, s_f, q_inv, strikes, maturity);
}

inline PriceResult price_copula(const MarketConfig& mkt, const ContractSpec& contract, const EmpiricalMarginal& marg_sf,
                                const EmpiricalMarginal& marg_qinv, const KernelCopula& cop, std::size_t n_draws,
                                std::uint64_t seed) {
    const double k[] = {contract.strike()};
    return price_copula(mkt, k, contract.maturity(), marg_sf, marg_qinv, cop, n_draws, seed).front();
}

}  // namespace quanto

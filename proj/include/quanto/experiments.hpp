#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "quanto/black_scholes.hpp"
#include "quanto/errors.hpp"
#include "quanto/expert_matrix.hpp"
#include "quanto/heston_sim.hpp"
#include "quanto/kernel_copula.hpp"
#include "quanto/key_value.hpp"
#include "quanto/marginals.hpp"
#include "quanto/market_model.hpp"
#include "quanto/pricing.hpp"
#include "quanto/rng.hpp"
#include "quanto/stats.hpp"

namespace quanto {

/// Monte Carlo vanilla call on one underlying, valued Black-style with the
/// underlying's drift as the discount rate.
struct VanillaQuote {
    double strike = 0.0;
    double price = 0.0;
    double std_error = 0.0;
    double implied_vol = std::numeric_limits<double>::quiet_NaN();
    double vol_error = std::numeric_limits<double>::quiet_NaN();  // std_error / vega
    bool ok = false;
    std::string note;
};

namespace detail {

/// Call value from terminal samples with E[S_T] = spot e^{drift T} exactly.
/// The out-of-the-money side is estimated (put below the forward, call
/// above) with S_T as a regression control, and the call follows by parity.
inline VanillaQuote vanilla_call_cv(std::span<const double> terminal, double spot, double drift, double maturity,
                                    double strike) {
    const double disc = std::exp(-drift * maturity);
    const double fwd = spot / disc;
    const bool put_side = strike < fwd;
    const std::size_t n = terminal.size();
    std::vector<double> y(n), x(terminal.begin(), terminal.end());
    for (std::size_t i = 0; i < n; ++i)
        y[i] = put_side ? std::max(strike - terminal[i], 0.0) : std::max(terminal[i] - strike, 0.0);
    const double y_mean = stats::pairwise_sum(y) / static_cast<double>(n);
    const double x_mean = stats::pairwise_sum(x) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - x_mean) * (y[i] - y_mean);
        sxx += (x[i] - x_mean) * (x[i] - x_mean);
    }
    const double beta = sxx > 0.0 ? sxy / sxx : 0.0;
    for (std::size_t i = 0; i < n; ++i) y[i] -= beta * (x[i] - fwd);
    const auto me = stats::mean_and_error(y);
    VanillaQuote q;
    q.strike = strike;
    q.price = disc * me.mean + (put_side ? spot - strike * disc : 0.0);
    q.std_error = disc * me.std_error;
    return q;
}

inline double vanilla_call_plain(std::span<const double> terminal, double drift, double maturity, double strike) {
    std::vector<double> y(terminal.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(terminal[i] - strike, 0.0);
    return std::exp(-drift * maturity) * stats::pairwise_sum(y) / static_cast<double>(y.size());
}

}  // namespace detail

/// Prices and implied vols at each strike. Quotes whose price leaves the
/// no-arbitrage band are returned with ok = false and a note.
inline std::vector<VanillaQuote> vanilla_smile(std::span<const double> terminal, double spot, double drift,
                                               double maturity, std::span<const double> strikes) {
    detail::require(terminal.size() >= 2, "vanilla pricing needs at least 2 samples");
    std::vector<VanillaQuote> out;
    for (double K : strikes) {
        BsQuote{spot, K, 0.0, maturity, drift}.validate();
        auto q = detail::vanilla_call_cv(terminal, spot, drift, maturity, K);
        const double lower = std::max(spot - K * std::exp(-drift * maturity), 0.0);
        if (!(q.price > lower && q.price < spot)) q.price = detail::vanilla_call_plain(terminal, drift, maturity, K);
        try {
            q.implied_vol = bs_implied_vol(q.price, spot, K, maturity, drift);
            const double vega = bs_vega({spot, K, q.implied_vol, maturity, drift});
            q.vol_error = vega > 0.0 ? q.std_error / vega : std::numeric_limits<double>::infinity();
            q.ok = true;
        } catch (const no_solution_error& e) {
            q.note = e.what();
        }
        out.push_back(std::move(q));
    }
    return out;
}

/// Implied-vol smile of a single Heston asset from grid.n_paths terminal values.
inline std::vector<VanillaQuote> emit_smile(const HestonParams& phi, double spot, double drift, double maturity,
                                            std::span<const double> strikes, const SimGrid& grid) {
    const auto terminal = simulate_heston_terminal(spot, phi, drift, maturity, grid);
    return vanilla_smile(terminal, spot, drift, maturity, strikes);
}

inline void write_smile_csv(std::ostream& out, std::span<const VanillaQuote> rows) {
    out << "strike,price,se_price,implied_vol,se_vol,flag\n";
    for (const auto& q : rows)
        out << format_double(q.strike) << ',' << format_double(q.price) << ',' << format_double(q.std_error) << ','
            << (q.ok ? format_double(q.implied_vol) : "") << ',' << (q.ok ? format_double(q.vol_error) : "") << ','
            << (q.ok ? "ok" : "outside_band") << '\n';
}

/// One reconstructed numerical case.
struct CaseSpec {
    int case_id = 1;
    CopulaGenerator family = GaussianCopula{-0.7};
    HestonParams phi_sf{0.0, 0.0, 0.0, 0.2, 0.0};
    HestonParams phi_qinv{0.0, 0.0, 0.0, 0.2, 0.0};
    double maturity = 3.0;
    std::vector<double> strikes;
    std::optional<double> frank_target_rho;  // set when alpha was calibrated

    std::string family_name() const {
        switch (family.index()) {
            case 0: return "gaussian";
            case 1: return "t";
            default: return "frank";
        }
    }

    void validate() const {
        detail::require(case_id >= 1 && case_id <= 6, "case id must lie in 1..6");
        quanto::validate(family);
        detail::require(std::isfinite(maturity) && maturity > 0.0, "maturity must be positive");
        detail::require(!strikes.empty(), "strike grid must not be empty");
        for (std::size_t i = 0; i < strikes.size(); ++i) {
            detail::require(std::isfinite(strikes[i]) && strikes[i] > 0.0, "strikes must be positive");
            detail::require(i == 0 || strikes[i] > strikes[i - 1], "strikes must be ascending");
        }
    }
};

inline constexpr std::size_t kStrikeCount = 21;
inline constexpr std::size_t kExpertRows = 100'000;
inline constexpr std::size_t kVanillaPathFactor = 4;
inline constexpr double kTDof = 3.0;

/// 21 equally spaced strikes from 0.5 s0 to 1.5 s0.
inline std::vector<double> default_strike_grid(double s0) {
    std::vector<double> k(kStrikeCount);
    for (std::size_t i = 0; i < kStrikeCount; ++i)
        k[i] = s0 * (0.5 + static_cast<double>(i) / static_cast<double>(kStrikeCount - 1));
    return k;
}

inline HestonParams constant_vol_params() { return {0.0, 0.0, 0.0, 0.2, 0.0}; }
inline HestonParams stochastic_vol_params() { return {-0.7, 1.0, 0.1, 0.2, 0.5}; }

/// Case table:
///   1  gaussian, constant variance, T = 3
///   2  gaussian, stochastic variance, T = 3
///   3  t (3 dof), stochastic variance, T = 3
///   4  as 3 with T = 0.25
///   5  frank (alpha matched to the normal-scores correlation), constant variance, T = 3
///   6  as 5 with T = 0.25
/// Every copula carries the market's rho(S_f, 1/Q).
inline CaseSpec make_case(int case_id, const MarketConfig& mkt, std::uint64_t seed) {
    detail::require(case_id >= 1 && case_id <= 6, "case id must lie in 1..6, got " + std::to_string(case_id));
    const double rho = mkt.rho_sf_qinv();
    CaseSpec c;
    c.case_id = case_id;
    c.strikes = default_strike_grid(mkt.s0());
    c.maturity = (case_id == 4 || case_id == 6) ? 0.25 : 3.0;
    const bool stochastic = case_id >= 2 && case_id <= 4;
    c.phi_sf = c.phi_qinv = stochastic ? stochastic_vol_params() : constant_vol_params();
    if (case_id <= 2) {
        c.family = GaussianCopula{rho};
    } else if (case_id <= 4) {
        c.family = StudentTCopula{rho, kTDof};
    } else {
        c.family = FrankCopula{calibrate_frank_alpha(rho, rng::derive_seed(seed, "frank-calibration"))};
        c.frank_target_rho = rho;
    }
    c.validate();
    return c;
}

struct CaseRow {
    double strike;
    PriceResult practitioner;
    PriceResult dsw;
    PriceResult copula;
    double vol_sf_strike;
};

struct CaseResult {
    CaseSpec spec;
    double vol_sf_atm;
    double vol_q_atm;
    std::vector<CaseRow> rows;
};

/// Streams consumed by run_case, all derived from grid.seed.
struct CaseSeeds {
    std::uint64_t dsw, vanilla_sf, vanilla_qinv, marginal_sf, marginal_qinv, expert, copula;

    static CaseSeeds derive(std::uint64_t master) {
        using rng::derive_seed;
        return {derive_seed(master, "dsw"),         derive_seed(master, "vanilla-sf"),
                derive_seed(master, "vanilla-qinv"), derive_seed(master, "marginal-sf"),
                derive_seed(master, "marginal-qinv"), derive_seed(master, "expert"),
                derive_seed(master, "copula")};
    }
};

/// Prices every strike of the case with all three approaches.
///
/// Practitioner: vols implied from vanilla Monte Carlo under the case's
/// Heston parameters (kVanillaPathFactor * grid.n_paths paths); ATM means
/// K = s0 for S_f (drift rf) and K = 1/Q(0) for 1/Q (drift rf - r).
/// DSW: joint simulation with grid.n_paths paths.
/// Copula: marginals from grid.n_paths single-asset paths per leg, a
/// kExpertRows expert matrix from the case family, grid.n_paths draws.
/// Strikes share random numbers within each pricer.
inline CaseResult run_case(const CaseSpec& spec, const MarketConfig& mkt, const SimGrid& grid) {
    spec.validate();
    grid.validate();
    const auto seeds = CaseSeeds::derive(grid.seed);
    const double T = spec.maturity;
    const double drift_sf = mkt.rf(), drift_qinv = mkt.rf() - mkt.r();

    CaseResult res{spec, 0.0, 0.0, {}};
    {
        const SimGrid vg{grid.n_paths * kVanillaPathFactor, grid.n_steps, seeds.vanilla_sf};
        const auto terminal = simulate_heston_terminal(mkt.s0(), spec.phi_sf, drift_sf, T, vg);
        std::vector<double> ks(spec.strikes);
        ks.push_back(mkt.s0());
        const auto quotes = vanilla_smile(terminal, mkt.s0(), drift_sf, T, ks);
        for (const auto& q : quotes)
            if (!q.ok) throw no_solution_error("S_f vanilla at strike " + format_double(q.strike) + ": " + q.note);
        res.vol_sf_atm = quotes.back().implied_vol;
        for (std::size_t i = 0; i < spec.strikes.size(); ++i)
            res.rows.push_back({spec.strikes[i], {}, {}, {}, quotes[i].implied_vol});
    }
    {
        const SimGrid vg{grid.n_paths * kVanillaPathFactor, grid.n_steps, seeds.vanilla_qinv};
        const auto terminal = simulate_heston_terminal(mkt.qinv0(), spec.phi_qinv, drift_qinv, T, vg);
        const double k[] = {mkt.qinv0()};
        const auto q = vanilla_smile(terminal, mkt.qinv0(), drift_qinv, T, k).front();
        if (!q.ok) throw no_solution_error("1/Q ATM vanilla: " + q.note);
        res.vol_q_atm = q.implied_vol;
    }
    for (auto& row : res.rows)
        row.practitioner = price_practitioner(mkt, {row.strike, T}, res.vol_sf_atm, res.vol_q_atm, row.vol_sf_strike);

    const auto dsw = price_dsw(mkt, spec.strikes, T, DswParams::from_market(mkt, spec.phi_sf, spec.phi_qinv),
                               {grid.n_paths, grid.n_steps, seeds.dsw});

    const auto m_sf = simulate_heston_terminal(mkt.s0(), spec.phi_sf, drift_sf, T,
                                               {grid.n_paths, grid.n_steps, seeds.marginal_sf});
    const auto m_qinv = simulate_heston_terminal(mkt.qinv0(), spec.phi_qinv, drift_qinv, T,
                                                 {grid.n_paths, grid.n_steps, seeds.marginal_qinv});
    const EmpiricalMarginal marg_sf(m_sf), marg_qinv(m_qinv);
    const KernelCopula cop(generate_expert_matrix(spec.family, kExpertRows, seeds.expert));
    const auto copula = price_copula(mkt, spec.strikes, T, marg_sf, marg_qinv, cop, grid.n_paths, seeds.copula);

    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        res.rows[i].dsw = dsw[i];
        res.rows[i].copula = copula[i];
    }
    return res;
}

inline constexpr const char* kCaseCsvHeader = "strike,price_practitioner,price_dsw,se_dsw,price_copula,se_copula";

inline void write_case_csv(std::ostream& out, std::span<const CaseRow> rows) {
    out << kCaseCsvHeader << '\n';
    for (const auto& r : rows)
        out << format_double(r.strike) << ',' << format_double(r.practitioner.price) << ','
            << format_double(r.dsw.price) << ',' << format_double(r.dsw.std_error) << ','
            << format_double(r.copula.price) << ',' << format_double(r.copula.std_error) << '\n';
}

/// |a - b| measured in combined standard errors sqrt(se_a^2 + se_b^2).
inline double separation(const PriceResult& a, const PriceResult& b) {
    const double se = std::hypot(a.std_error, b.std_error);
    const double d = std::abs(a.price - b.price);
    if (se == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return d / se;
}

}  // namespace quanto

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "quanto/errors.hpp"
#include "quanto/market_model.hpp"
#include "quanto/parallel.hpp"
#include "quanto/rng.hpp"

namespace quanto {

struct SimGrid {
    std::size_t n_paths = 200'000;
    std::uint32_t n_steps = 288;
    std::uint64_t seed = 1;

    void validate() const {
        detail::require(n_paths >= 1, "n_paths must be >= 1");
        detail::require(n_steps >= 1, "n_steps must be >= 1");
    }

    /// 96 steps per year, at least 24 in total.
    static std::uint32_t default_steps(double maturity) {
        detail::require(maturity > 0.0 && std::isfinite(maturity), "maturity must be positive");
        return std::max<std::uint32_t>(24, static_cast<std::uint32_t>(std::ceil(96.0 * maturity - 1e-9)));
    }

    static SimGrid for_maturity(double maturity, std::size_t n_paths, std::uint64_t seed) {
        return {n_paths, default_steps(maturity), seed};
    }
};

/// Joint Heston parameters of the asset S_f and the exchange rate 1/Q, both
/// under the foreign risk-neutral measure. rho_cross correlates the price
/// Brownian motions of the two legs. The dividend yield is zero.
struct DswParams {
    HestonParams phi_sf;
    HestonParams phi_qinv;
    double rho_cross;
    double r;
    double rf;

    void validate() const {
        detail::require_finite(rho_cross, "rho_cross");
        detail::require_finite(r, "r");
        detail::require_finite(rf, "rf");
        detail::require(rho_cross >= -1.0 && rho_cross <= 1.0, "rho_cross must lie in [-1, 1]");
    }

    static DswParams from_market(const MarketConfig& mkt, const HestonParams& phi_sf, const HestonParams& phi_qinv) {
        return {phi_sf, phi_qinv, mkt.rho_sf_qinv(), mkt.r(), mkt.rf()};
    }
};

struct JointSample {
    double s_f;
    double q_inv;
};

namespace detail {

/// One variance/log-price pair advanced by full-truncation Euler: the
/// variance is floored at zero wherever it enters drift or diffusion, and the
/// log-price step uses that floored variance, which makes exp() of it an
/// exact per-step martingale.
struct HestonLeg {
    double log_price;
    double variance;

    double step(const HestonParams& p, double drift, double dt, double sqrt_dt, double z_price,
                double z_variance) noexcept {
        const double v = std::max(variance, 0.0);
        const double sd = std::sqrt(v) * sqrt_dt;
        const double dlog = (drift - 0.5 * v) * dt + sd * z_price;
        log_price += dlog;
        variance += p.kappa() * (p.v_bar() - v) * dt + p.eta() * sd * z_variance;
        return dlog;
    }
};

inline void check_terminal(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::runtime_error("simulated terminal value is not finite and positive");
}

inline void validate_sim_inputs(double spot, double drift, double maturity, const SimGrid& grid) {
    require_finite(spot, "spot");
    require_finite(drift, "drift");
    require_finite(maturity, "maturity");
    require(spot > 0.0, "spot must be positive");
    require(maturity > 0.0, "maturity must be positive");
    grid.validate();
}

}  // namespace detail

/// Single-asset Heston path `path`; on_step(step, dlog) sees every log increment.
/// Normals for step k come from block 0 of address (seed, path, k): the
/// first drives the price, the second the independent part of the variance.
template <class OnStep>
double heston_path(const rng::CounterRng& gen, std::uint64_t path, double spot, const HestonParams& p, double drift,
                   double maturity, std::uint32_t n_steps, OnStep&& on_step) {
    const double dt = maturity / n_steps;
    const double sqrt_dt = std::sqrt(dt);
    const double rho = p.rho_sv();
    const double rho_perp = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    detail::HestonLeg leg{std::log(spot), p.v0()};
    for (std::uint32_t k = 0; k < n_steps; ++k) {
        const auto [z1, z2] = gen.normals(path, k, 0);
        on_step(k, leg.step(p, drift, dt, sqrt_dt, z1, rho * z1 + rho_perp * z2));
    }
    return std::exp(leg.log_price);
}

/// Terminal values S(T) of n_paths independent Heston paths with the given drift.
inline std::vector<double> simulate_heston_terminal(double spot, const HestonParams& params, double drift,
                                                    double maturity, const SimGrid& grid) {
    detail::validate_sim_inputs(spot, drift, maturity, grid);
    std::vector<double> out(grid.n_paths);
    const rng::CounterRng gen(grid.seed);
    parallel_for(grid.n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            out[i] = heston_path(gen, i, spot, params, drift, maturity, grid.n_steps, [](std::uint32_t, double) {});
            detail::check_terminal(out[i]);
        }
    });
    return out;
}

/// Joint path of (S_f, V1, 1/Q, V2). Per step four independent normals
/// (w0..w3, blocks 0 and 1) are mixed by the lower-triangular matrix
///   S_f : w0
///   V1  : rho1 w0 + sqrt(1-rho1^2) w1
///   1/Q : rho w0 + sqrt(1-rho^2) w2
///   V2  : rho rho2 w0 + rho2 sqrt(1-rho^2) w2 + sqrt(1-rho2^2) w3
/// on_step(step, dlog_sf, dlog_qinv) sees the log increments.
template <class OnStep>
JointSample dsw_path(const rng::CounterRng& gen, std::uint64_t path, double s0, double qinv0, const DswParams& p,
                     double maturity, std::uint32_t n_steps, OnStep&& on_step) {
    const double dt = maturity / n_steps;
    const double sqrt_dt = std::sqrt(dt);
    const double rho1 = p.phi_sf.rho_sv(), rho2 = p.phi_qinv.rho_sv(), rho = p.rho_cross;
    const double rho1_perp = std::sqrt(std::max(0.0, 1.0 - rho1 * rho1));
    const double rho2_perp = std::sqrt(std::max(0.0, 1.0 - rho2 * rho2));
    const double rho_perp = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double drift_sf = p.rf;
    const double drift_qinv = p.rf - p.r;
    detail::HestonLeg asset{std::log(s0), p.phi_sf.v0()};
    detail::HestonLeg fx{std::log(qinv0), p.phi_qinv.v0()};
    for (std::uint32_t k = 0; k < n_steps; ++k) {
        const auto [w0, w1] = gen.normals(path, k, 0);
        const auto [w2, w3] = gen.normals(path, k, 1);
        const double dw_fx = rho * w0 + rho_perp * w2;
        const double dlog_sf = asset.step(p.phi_sf, drift_sf, dt, sqrt_dt, w0, rho1 * w0 + rho1_perp * w1);
        const double dlog_qinv = fx.step(p.phi_qinv, drift_qinv, dt, sqrt_dt, dw_fx, rho2 * dw_fx + rho2_perp * w3);
        on_step(k, dlog_sf, dlog_qinv);
    }
    return {std::exp(asset.log_price), std::exp(fx.log_price)};
}

/// Terminal (S_f(T), 1/Q(T)) pairs under the foreign measure: S_f drifts at
/// r_f, 1/Q at r_f - r.
inline std::vector<JointSample> simulate_dsw_joint(double s0, double qinv0, const DswParams& params, double maturity,
                                                   const SimGrid& grid) {
    detail::validate_sim_inputs(s0, 0.0, maturity, grid);
    detail::require_finite(qinv0, "qinv0");
    detail::require(qinv0 > 0.0, "qinv0 must be positive");
    params.validate();
    std::vector<JointSample> out(grid.n_paths);
    const rng::CounterRng gen(grid.seed);
    parallel_for(grid.n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            out[i] = dsw_path(gen, i, s0, qinv0, params, maturity, grid.n_steps, [](std::uint32_t, double, double) {});
            detail::check_terminal(out[i].s_f);
            detail::check_terminal(out[i].q_inv);
        }
    });
    return out;
}

}  // namespace quanto

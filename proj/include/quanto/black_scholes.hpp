#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "quanto/errors.hpp"
#include "quanto/key_value.hpp"
#include "quanto/normal.hpp"

namespace quanto {

/// No-dividend vanilla quote. vol is per sqrt(year), rate continuously compounded.
struct BsQuote {
    double spot;
    double strike;
    double vol;
    double maturity;
    double rate;

    void validate() const {
        for (auto [v, name] : {std::pair{spot, "spot"}, {strike, "strike"}, {vol, "vol"}, {maturity, "maturity"},
                               {rate, "rate"}})
            detail::require_finite(v, name);
        detail::require(spot > 0.0, "spot must be positive");
        detail::require(strike > 0.0, "strike must be positive");
        detail::require(maturity > 0.0, "maturity must be positive");
        detail::require(vol >= 0.0, "vol must be >= 0");
    }
};

namespace detail {

inline double bs_call_unchecked(double spot, double strike, double vol, double maturity, double rate) {
    const double discounted_strike = strike * std::exp(-rate * maturity);
    const double total_vol = vol * std::sqrt(maturity);
    if (total_vol <= 0.0) return std::max(spot - discounted_strike, 0.0);
    const double d1 = std::log(spot / discounted_strike) / total_vol + 0.5 * total_vol;
    const double d2 = d1 - total_vol;
    const double value = spot * norm_cdf(d1) - discounted_strike * norm_cdf(d2);
    return std::clamp(value, std::max(spot - discounted_strike, 0.0), spot);
}

}  // namespace detail

/// Black-Scholes call value.
inline double bs_call(const BsQuote& q) {
    q.validate();
    return detail::bs_call_unchecked(q.spot, q.strike, q.vol, q.maturity, q.rate);
}

inline double bs_vega(const BsQuote& q) {
    q.validate();
    const double total_vol = q.vol * std::sqrt(q.maturity);
    if (total_vol <= 0.0) return 0.0;
    const double d1 = std::log(q.spot / (q.strike * std::exp(-q.rate * q.maturity))) / total_vol + 0.5 * total_vol;
    return q.spot * norm_pdf(d1) * std::sqrt(q.maturity);
}

/// Implied volatility by a safeguarded bisection-secant search.
///
/// The target must lie strictly inside (max(spot - K e^{-rT}, 0), spot).
/// The initial bracket is [1e-6, 5]; its upper end doubles up to 40 before
/// giving up. Converges when the repriced call is within 1e-10 of the target
/// or the bracket collapses to a few ulps.
inline double bs_implied_vol(double target_price, double spot, double strike, double maturity, double rate) {
    BsQuote{spot, strike, 0.0, maturity, rate}.validate();
    detail::require_finite(target_price, "target price");
    const double lower_bound = std::max(spot - strike * std::exp(-rate * maturity), 0.0);
    if (target_price <= lower_bound)
        throw no_solution_error("price " + format_double(target_price) + " is at or below the lower no-arbitrage bound " +
                                format_double(lower_bound));
    if (target_price >= spot)
        throw no_solution_error("price " + format_double(target_price) + " is at or above the upper no-arbitrage bound (spot) " +
                                format_double(spot));

    auto f = [&](double vol) { return detail::bs_call_unchecked(spot, strike, vol, maturity, rate) - target_price; };

    double lo = 1e-6, hi = 5.0;
    double f_lo = f(lo), f_hi = f(hi);
    if (f_lo > 0.0) {
        // Root below 1e-6: the zero-vol price is the lower bound, already excluded.
        lo = 0.0;
        f_lo = lower_bound - target_price;
    }
    while (f_hi < 0.0) {
        if (hi >= 40.0) throw convergence_error("implied vol not bracketed below 40");
        hi *= 2.0;
        f_hi = f(hi);
    }

    constexpr double kPriceTol = 1e-10;
    constexpr int kMaxIter = 200;
    int side = 0;  // Illinois weighting: which end was retained last
    for (int iter = 0; iter < kMaxIter; ++iter) {
        double x = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        // Bisect when the secant point leaves the bracket, and periodically
        // so the bracket width is guaranteed to shrink.
        if (!(x > lo && x < hi) || iter % 8 == 7) x = 0.5 * (lo + hi);
        const double fx = f(x);
        if (std::abs(fx) <= kPriceTol) return x;
        if (fx < 0.0) {
            lo = x;
            f_lo = fx;
            if (side == -1) f_hi *= 0.5;
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if (side == 1) f_lo *= 0.5;
            side = 1;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
            const double best = std::abs(f(lo)) < std::abs(f(hi)) ? lo : hi;
            return best;
        }
    }
    throw convergence_error("implied vol search exceeded 200 iterations");
}

}  // namespace quanto

#pragma once

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

namespace quanto {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

/// Standard normal CDF through erfc; keeps full relative accuracy in the lower tail.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

/// Inverse of norm_cdf on (0,1).
inline double norm_quantile(double p) {
    if (p <= 0.0) return -INFINITY;
    if (p >= 1.0) return INFINITY;
    return -M_SQRT2 * boost::math::erfc_inv(2.0 * p);
}

/// Inverse of the upper tail 1 - norm_cdf; accurate when q is tiny.
inline double norm_quantile_upper(double q) { return -norm_quantile(q); }

}  // namespace quanto

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace quanto::stats {

/// Pairwise (cascade) summation with a fixed split order.
inline double pairwise_sum(std::span<const double> x) {
    constexpr std::size_t kLeaf = 64;
    if (x.size() <= kLeaf) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

struct MeanError {
    double mean = 0.0;
    double std_error = 0.0;
    double std_dev = 0.0;
};

/// Sample mean, unbiased standard deviation and standard error of the mean.
inline MeanError mean_and_error(std::span<const double> x) {
    MeanError out;
    if (x.empty()) return out;
    const double n = static_cast<double>(x.size());
    out.mean = pairwise_sum(x) / n;
    if (x.size() < 2) return out;
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - out.mean;
        sq[i] = d * d;
    }
    out.std_dev = std::sqrt(pairwise_sum(sq) / (n - 1.0));
    out.std_error = out.std_dev / std::sqrt(n);
    return out;
}

inline double correlation(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const double mx = pairwise_sum(x) / static_cast<double>(n);
    const double my = pairwise_sum(y) / static_cast<double>(n);
    std::vector<double> sxy(n), sxx(n), syy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy[i] = dx * dy;
        sxx[i] = dx * dx;
        syy[i] = dy * dy;
    }
    return pairwise_sum(sxy) / std::sqrt(pairwise_sum(sxx) * pairwise_sum(syy));
}

}  // namespace quanto::stats

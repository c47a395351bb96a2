#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "quanto/errors.hpp"

namespace quanto {

/// Continuous CDF estimate from a sample of size M.
///
/// The k-th order statistic sits at plotting position k/(M+1); the CDF
/// interpolates linearly between these nodes and is held flat at the first
/// and last node outside the sample range. Tied order statistics collapse to
/// one node at their averaged plotting position, so the interior is strictly
/// increasing and has no atoms.
class EmpiricalMarginal {
public:
    explicit EmpiricalMarginal(std::span<const double> samples) {
        detail::require(samples.size() >= 2, "empirical marginal needs at least 2 samples");
        for (double x : samples) detail::require_finite(x, "sample");
        sorted_.assign(samples.begin(), samples.end());
        std::sort(sorted_.begin(), sorted_.end());

        const double m1 = static_cast<double>(sorted_.size() + 1);
        for (std::size_t i = 0; i < sorted_.size();) {
            std::size_t j = i;
            while (j + 1 < sorted_.size() && sorted_[j + 1] == sorted_[i]) ++j;
            // ranks i+1 .. j+1 share one node
            const double avg_rank = 0.5 * static_cast<double>((i + 1) + (j + 1));
            nodes_x_.push_back(sorted_[i]);
            nodes_p_.push_back(avg_rank / m1);
            i = j + 1;
        }
    }

    std::size_t size() const noexcept { return sorted_.size(); }
    const std::vector<double>& sorted_samples() const noexcept { return sorted_; }
    double min() const noexcept { return sorted_.front(); }
    double max() const noexcept { return sorted_.back(); }

    double cdf(double x) const {
        detail::require(!std::isnan(x), "cdf argument must not be NaN");
        if (x <= nodes_x_.front()) return nodes_p_.front();
        if (x >= nodes_x_.back()) return nodes_p_.back();
        const auto it = std::upper_bound(nodes_x_.begin(), nodes_x_.end(), x);
        const std::size_t k = static_cast<std::size_t>(it - nodes_x_.begin());  // nodes_x_[k-1] <= x < nodes_x_[k]
        const double x0 = nodes_x_[k - 1], x1 = nodes_x_[k];
        const double p0 = nodes_p_[k - 1], p1 = nodes_p_[k];
        return p0 + (p1 - p0) * (x - x0) / (x1 - x0);
    }

    /// Generalized inverse of cdf(); returns the sample extremes outside the node band.
    double quantile(double u) const {
        detail::require(u > 0.0 && u < 1.0, "quantile level must lie in (0, 1)");
        if (u <= nodes_p_.front()) return nodes_x_.front();
        if (u >= nodes_p_.back()) return nodes_x_.back();
        const auto it = std::lower_bound(nodes_p_.begin(), nodes_p_.end(), u);
        const std::size_t k = static_cast<std::size_t>(it - nodes_p_.begin());  // nodes_p_[k-1] < u <= nodes_p_[k]
        const double p0 = nodes_p_[k - 1], p1 = nodes_p_[k];
        const double x0 = nodes_x_[k - 1], x1 = nodes_x_[k];
        return x0 + (x1 - x0) * (u - p0) / (p1 - p0);
    }

private:
    std::vector<double> sorted_;
    std::vector<double> nodes_x_;
    std::vector<double> nodes_p_;
};

inline EmpiricalMarginal marginal_from_samples(std::span<const double> samples) { return EmpiricalMarginal(samples); }

inline double quantile(const EmpiricalMarginal& marginal, double u) { return marginal.quantile(u); }

}  // namespace quanto

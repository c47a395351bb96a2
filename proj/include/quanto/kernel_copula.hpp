#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "quanto/errors.hpp"
#include "quanto/expert_matrix.hpp"
#include "quanto/normal.hpp"
#include "quanto/parallel.hpp"
#include "quanto/rng.hpp"
#include "quanto/stats.hpp"

namespace quanto {

/// Kernel estimate of the joint CDF from expert rows:
///   F(s, r) = 1/N sum_n Phi((s - a_n1)/h) Phi((r - a_n2)/h),
/// the closed-form integral of the product Gaussian kernel density.
inline double kernel_cdf(std::span<const ExpertRow> data, double h, double s, double r) {
    detail::require(std::isfinite(h) && h > 0.0, "bandwidth must be positive");
    detail::require(!data.empty(), "kernel estimate needs data");
    detail::require(!std::isnan(s) && !std::isnan(r), "kernel_cdf query must not be NaN");
    double sum = 0.0;
    for (const auto& row : data) sum += norm_cdf((s - row.s_f) / h) * norm_cdf((r - row.q_inv) / h);
    return sum / static_cast<double>(data.size());
}

inline double kernel_cdf(const ExpertMatrix& data, double h, double s, double r) {
    return kernel_cdf(std::span<const ExpertRow>(data.rows()), h, s, r);
}

/// Marginal of kernel_cdf for column 1 (S_f) or 2 (1/Q).
inline double kernel_marginal_cdf(std::span<const ExpertRow> data, double h, int column, double x) {
    detail::require(std::isfinite(h) && h > 0.0, "bandwidth must be positive");
    detail::require(column == 1 || column == 2, "column must be 1 or 2");
    detail::require(!data.empty(), "kernel estimate needs data");
    detail::require(!std::isnan(x), "kernel_marginal_cdf query must not be NaN");
    double sum = 0.0;
    for (const auto& row : data) sum += norm_cdf((x - (column == 1 ? row.s_f : row.q_inv)) / h);
    return sum / static_cast<double>(data.size());
}

inline double kernel_marginal_cdf(const ExpertMatrix& data, double h, int column, double x) {
    return kernel_marginal_cdf(std::span<const ExpertRow>(data.rows()), h, column, x);
}

/// Copula C(u1, u2) = F(xi1(u1), xi2(u2)) of the kernel-smoothed expert data,
/// where xi_i is the generalized inverse of the i-th kernel marginal.
///
/// Each column is standardized to zero mean and unit sample variance, and a
/// single bandwidth h (default 1.06 N^{-1/5}) is applied to both. Evaluation
/// coordinates (xi, joint_cdf arguments) are in these standardized units.
/// Quantile arguments are clamped to [1e-6, 1 - 1e-6].
class KernelCopula {
public:
    static constexpr double kQuantileClamp = 1e-6;
    static constexpr double kQuantileTol = 1e-10;

    static double rule_of_thumb_bandwidth(std::size_t n) { return 1.06 * std::pow(static_cast<double>(n), -0.2); }

    explicit KernelCopula(const ExpertMatrix& data) : KernelCopula(data, rule_of_thumb_bandwidth(data.size())) {}

    KernelCopula(const ExpertMatrix& data, double bandwidth) : h_(bandwidth) {
        detail::require(std::isfinite(bandwidth) && bandwidth > 0.0, "bandwidth must be positive");
        const std::size_t n = data.size();
        std::array<double, 2> mean{}, sd{};
        for (int c = 0; c < 2; ++c) {
            const auto col = data.column(c + 1);
            const auto me = stats::mean_and_error(col);
            detail::require(me.std_dev > 0.0, "expert matrix column has zero variance");
            mean[c] = me.mean;
            sd[c] = me.std_dev;
        }
        std::vector<ExpertRow> scaled(n);
        for (std::size_t i = 0; i < n; ++i)
            scaled[i] = {(data[i].s_f - mean[0]) / sd[0], (data[i].q_inv - mean[1]) / sd[1]};
        standardized_ = ExpertMatrix(std::move(scaled));

        by_first_ = standardized_.rows();
        std::sort(by_first_.begin(), by_first_.end(), [](const ExpertRow& a, const ExpertRow& b) { return a.s_f < b.s_f; });
        for (int c = 0; c < 2; ++c) {
            sorted_[c] = standardized_.column(c + 1);
            std::sort(sorted_[c].begin(), sorted_[c].end());
            build_table(c);
        }
    }

    double bandwidth() const noexcept { return h_; }
    std::size_t size() const noexcept { return standardized_.size(); }
    const ExpertMatrix& standardized_data() const noexcept { return standardized_; }

    /// Kernel marginal CDF of column 1 or 2 at standardized x.
    double marginal_cdf(int column, double x) const { return marginal_eval(column_index(column), x).cdf; }

    double marginal_density(int column, double x) const { return marginal_eval(column_index(column), x).density; }

    /// Kernel joint CDF at standardized (s, r).
    double joint_cdf(double s, double r) const {
        const double cut = kCutoff * h_;
        const auto end = std::upper_bound(by_first_.begin(), by_first_.end(), s + cut,
                                          [](double v, const ExpertRow& row) { return v < row.s_f; });
        double sum = 0.0;
        for (auto it = by_first_.begin(); it != end; ++it) {
            const double p1 = it->s_f < s - cut ? 1.0 : norm_cdf((s - it->s_f) / h_);
            double p2;
            if (it->q_inv < r - cut)
                p2 = 1.0;
            else if (it->q_inv > r + cut)
                continue;
            else
                p2 = norm_cdf((r - it->q_inv) / h_);
            sum += p1 * p2;
        }
        return sum / static_cast<double>(size());
    }

    /// xi(u) = inf{x : F_column(x) >= u} for u clamped to [1e-6, 1 - 1e-6];
    /// |F(xi) - u| <= 1e-10.
    double quantile(int column, double u) const {
        detail::require(u >= 0.0 && u <= 1.0, "copula argument must lie in [0, 1]");
        const int c = column_index(column);
        u = std::clamp(u, kQuantileClamp, 1.0 - kQuantileClamp);

        // Seed from the interpolation table, polish with exact Newton steps.
        double x = table_inverse(c, u);
        for (int i = 0; i < 3; ++i) {
            const auto e = marginal_eval(c, x);
            if (std::abs(e.cdf - u) <= kQuantileTol) return x;
            if (!(e.density > 0.0)) break;
            x -= (e.cdf - u) / e.density;
        }
        return bisect_quantile(c, u, x);
    }

    /// C(u1, u2).
    double eval(double u1, double u2) const {
        detail::require(u1 >= 0.0 && u1 <= 1.0 && u2 >= 0.0 && u2 <= 1.0, "copula arguments must lie in [0, 1]");
        return joint_cdf(quantile(1, u1), quantile(2, u2));
    }

    /// C on the tensor grid us x vs; row i holds C(us[i], vs[j]).
    std::vector<std::vector<double>> eval_grid(std::span<const double> us, std::span<const double> vs) const {
        std::vector<double> xi1(us.size()), xi2(vs.size());
        for (std::size_t i = 0; i < us.size(); ++i) xi1[i] = quantile(1, us[i]);
        for (std::size_t j = 0; j < vs.size(); ++j) xi2[j] = quantile(2, vs[j]);
        std::vector<std::vector<double>> out(us.size(), std::vector<double>(vs.size()));
        parallel_for(
            us.size() * vs.size(),
            [&](std::size_t begin, std::size_t end) {
                for (std::size_t k = begin; k < end; ++k)
                    out[k / vs.size()][k % vs.size()] = joint_cdf(xi1[k / vs.size()], xi2[k % vs.size()]);
            },
            1);
        return out;
    }

    /// Exact draws from the kernel mixture density pushed through the kernel
    /// marginal CDFs: pick row n* uniformly, add h*(z1, z2), map each
    /// coordinate by its marginal. Draw i reads substream i of the seed.
    std::vector<std::array<double, 2>> sample(std::size_t n, std::uint64_t seed) const {
        detail::require(n >= 1, "sample count must be >= 1");
        std::vector<std::array<double, 2>> out(n);
        const rng::CounterRng gen(seed);
        const auto& rows = standardized_.rows();
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto [z1, z2] = gen.normals(i, 0, 0);
                const auto& row = rows[rng::index_below(gen.bits(i, 0, 1).first, rows.size())];
                out[i] = {to_open_unit(table_cdf(0, row.s_f + h_ * z1)), to_open_unit(table_cdf(1, row.q_inv + h_ * z2))};
            }
        });
        return out;
    }

    /// Interpolated marginal CDF used by sample(); agrees with marginal_cdf
    /// to ~1e-10.
    double fast_marginal_cdf(int column, double x) const { return table_cdf(column_index(column), x); }

private:
    // Phi(-9) ~ 1e-19: kernels further away contribute exactly 0 or 1.
    static constexpr double kCutoff = 9.0;
    static constexpr double kNodesPerBandwidth = 8.0;
    static constexpr std::size_t kMaxNodes = 400'000;

    struct MarginalValue {
        double cdf;
        double density;
    };

    struct Table {
        double x0 = 0.0;
        double dx = 1.0;
        std::vector<double> cdf;
        std::vector<double> density;
    };

    static int column_index(int column) {
        detail::require(column == 1 || column == 2, "column must be 1 or 2");
        return column - 1;
    }

    static double to_open_unit(double p) { return std::clamp(p, 0x1.0p-1000, 1.0 - 0x1.0p-53); }

    MarginalValue marginal_eval(int c, double x) const {
        detail::require(!std::isnan(x), "marginal query must not be NaN");
        const auto& col = sorted_[c];
        const double cut = kCutoff * h_;
        const auto lo = std::lower_bound(col.begin(), col.end(), x - cut);
        const auto hi = std::upper_bound(lo, col.end(), x + cut);
        double cdf = 0.0, dens = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const double z = (x - *it) / h_;
            cdf += norm_cdf(z);
            dens += norm_pdf(z);
        }
        const double n = static_cast<double>(col.size());
        cdf += static_cast<double>(lo - col.begin());
        return {cdf / n, dens / (n * h_)};
    }

    void build_table(int c) {
        auto& t = tables_[c];
        const double lo = sorted_[c].front() - kCutoff * h_;
        const double hi = sorted_[c].back() + kCutoff * h_;
        t.dx = h_ / kNodesPerBandwidth;
        auto nodes = static_cast<std::size_t>(std::ceil((hi - lo) / t.dx)) + 1;
        if (nodes > kMaxNodes) {
            nodes = kMaxNodes;
            t.dx = (hi - lo) / static_cast<double>(nodes - 1);
        }
        t.x0 = lo;
        t.cdf.resize(nodes);
        t.density.resize(nodes);
        parallel_for(
            nodes,
            [&](std::size_t begin, std::size_t end) {
                for (std::size_t k = begin; k < end; ++k) {
                    const auto v = marginal_eval(c, t.x0 + static_cast<double>(k) * t.dx);
                    t.cdf[k] = v.cdf;
                    t.density[k] = v.density;
                }
            },
            64);
        // Enforce monotone nodes against summation noise.
        for (std::size_t k = 1; k < nodes; ++k) t.cdf[k] = std::max(t.cdf[k], t.cdf[k - 1]);
    }

    double hermite(const Table& t, std::size_t k, double s) const {
        const double s2 = s * s, s3 = s2 * s;
        const double v = (2 * s3 - 3 * s2 + 1) * t.cdf[k] + (s3 - 2 * s2 + s) * t.dx * t.density[k] +
                         (-2 * s3 + 3 * s2) * t.cdf[k + 1] + (s3 - s2) * t.dx * t.density[k + 1];
        return std::clamp(v, t.cdf[k], t.cdf[k + 1]);
    }

    double table_cdf(int c, double x) const {
        const auto& t = tables_[c];
        const double pos = (x - t.x0) / t.dx;
        if (!(pos >= 0.0) || pos >= static_cast<double>(t.cdf.size() - 1)) return marginal_eval(c, x).cdf;
        const auto k = static_cast<std::size_t>(pos);
        return hermite(t, k, pos - static_cast<double>(k));
    }

    double table_inverse(int c, double u) const {
        const auto& t = tables_[c];
        auto it = std::lower_bound(t.cdf.begin(), t.cdf.end(), u);
        if (it == t.cdf.begin()) return t.x0;
        if (it == t.cdf.end()) return t.x0 + t.dx * static_cast<double>(t.cdf.size() - 1);
        const auto k = static_cast<std::size_t>(it - t.cdf.begin()) - 1;  // cdf[k] < u <= cdf[k+1]
        double a = 0.0, b = 1.0;
        for (int i = 0; i < 60; ++i) {
            const double m = 0.5 * (a + b);
            (hermite(t, k, m) < u ? a : b) = m;
        }
        return t.x0 + t.dx * (static_cast<double>(k) + 0.5 * (a + b));
    }

    double bisect_quantile(int c, double u, double guess) const {
        double step = tables_[c].dx;
        double lo = guess - step, hi = guess + step;
        while (marginal_eval(c, lo).cdf > u) lo -= (step *= 2.0);
        step = tables_[c].dx;
        while (marginal_eval(c, hi).cdf < u) hi += (step *= 2.0);
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            const double f = marginal_eval(c, mid).cdf;
            if (std::abs(f - u) <= kQuantileTol) return mid;
            (f < u ? lo : hi) = mid;
            if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
        }
        return 0.5 * (lo + hi);
    }

    double h_;
    ExpertMatrix standardized_{std::vector<ExpertRow>(ExpertMatrix::kMinRows, ExpertRow{0.0, 0.0})};
    std::vector<ExpertRow> by_first_;
    std::array<std::vector<double>, 2> sorted_;
    std::array<Table, 2> tables_;
};

/// Free-function forms of the copula operations.
inline double copula_eval(const KernelCopula& cop, double u1, double u2) { return cop.eval(u1, u2); }

inline std::vector<std::array<double, 2>> copula_sample(const KernelCopula& cop, std::size_t n, std::uint64_t seed) {
    return cop.sample(n, seed);
}

}  // namespace quanto

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "quanto/expert_matrix.hpp"
#include "quanto/kernel_copula.hpp"
#include "quanto/stats.hpp"
#include "support/oracles.hpp"

using namespace quanto;

namespace {

constexpr double kBoundaryTol = 1e-4;

std::vector<double> interior_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
    return g;
}

const ExpertMatrix& gaussian_matrix() {
    static const ExpertMatrix m = generate_expert_matrix(GaussianCopula{-0.7}, 100000, 21);
    return m;
}

const KernelCopula& gaussian_copula() {
    static const KernelCopula c(gaussian_matrix());
    return c;
}

}  // namespace

TEST(KernelCdf, SinglePointIsQuarterAtOrigin) {
    const ExpertRow one[] = {{0.0, 0.0}};
    EXPECT_DOUBLE_EQ(kernel_cdf(std::span<const ExpertRow>(one), 0.3, 0.0, 0.0), 0.25);
}

TEST(KernelCdf, Limits) {
    const auto& m = gaussian_matrix();
    const std::span<const ExpertRow> rows(m.rows().data(), 500);
    EXPECT_GT(kernel_cdf(rows, 0.2, 1e9, 1e9), 1 - 1e-12);
    EXPECT_LT(kernel_cdf(rows, 0.2, -1e9, 0.0), 1e-12);
    EXPECT_LT(kernel_cdf(rows, 0.2, 0.0, -1e9), 1e-12);
    EXPECT_THROW(kernel_cdf(rows, 0.2, NAN, 0.0), domain_error);
    EXPECT_THROW(kernel_cdf(rows, 0.0, 0.0, 0.0), domain_error);
}

TEST(KernelCdf, MatchesTwoDimensionalQuadrature) {
    std::mt19937_64 gen(50);
    std::normal_distribution<double> z;
    std::vector<ExpertRow> rows(50);
    std::vector<std::pair<double, double>> pts(50);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = {z(gen), 0.5 * z(gen) + 1.0};
        pts[i] = {rows[i].s_f, rows[i].q_inv};
    }
    std::uniform_real_distribution<double> qs(-2.5, 2.5), qr(-0.5, 2.5);
    for (int k = 0; k < 20; ++k) {
        const double s = qs(gen), r = qr(gen);
        EXPECT_NEAR(kernel_cdf(rows, 0.3, s, r), oracle::kernel_mixture_cdf_quadrature(pts, 0.3, s, r), 1e-6);
    }
}

TEST(KernelMarginal, SymmetricSinglePointMedian) {
    const ExpertRow one[] = {{1.5, -2.0}};
    EXPECT_DOUBLE_EQ(kernel_marginal_cdf(std::span<const ExpertRow>(one), 0.4, 1, 1.5), 0.5);
    EXPECT_DOUBLE_EQ(kernel_marginal_cdf(std::span<const ExpertRow>(one), 0.4, 2, -2.0), 0.5);
    EXPECT_THROW(kernel_marginal_cdf(std::span<const ExpertRow>(one), 0.4, 3, 0.0), domain_error);
}

TEST(KernelMarginal, StrictlyIncreasingAndConsistentWithJoint) {
    const auto& m = gaussian_matrix();
    const std::span<const ExpertRow> rows(m.rows().data(), 1000);
    double prev = -1;
    for (int i = 0; i < 100; ++i) {
        const double x = -4 + 8.0 * i / 99;
        const double f = kernel_marginal_cdf(rows, 0.25, 1, x);
        EXPECT_GT(f, prev);
        prev = f;
        EXPECT_NEAR(kernel_cdf(rows, 0.25, x, 1e300), f, 1e-12);
        EXPECT_NEAR(kernel_cdf(rows, 0.25, 1e300, x), kernel_marginal_cdf(rows, 0.25, 2, x), 1e-12);
    }
}

TEST(KernelCopula, BandwidthRule) {
    EXPECT_DOUBLE_EQ(KernelCopula::rule_of_thumb_bandwidth(100000), 1.06 * std::pow(1e5, -0.2));
    EXPECT_DOUBLE_EQ(gaussian_copula().bandwidth(), 1.06 * std::pow(1e5, -0.2));
    EXPECT_THROW(KernelCopula(gaussian_matrix(), 0.0), domain_error);
    EXPECT_THROW(KernelCopula(ExpertMatrix(std::vector<ExpertRow>(20, {1.0, 2.0}))), domain_error);
}

TEST(KernelCopula, WindowedMarginalMatchesExactSum) {
    const auto& c = gaussian_copula();
    const auto& std_rows = c.standardized_data().rows();
    for (double x : {-5.0, -1.3, 0.0, 0.7, 2.2, 6.0})
        for (int col : {1, 2}) {
            EXPECT_NEAR(c.marginal_cdf(col, x), kernel_marginal_cdf(std_rows, c.bandwidth(), col, x), 1e-13);
            EXPECT_NEAR(c.fast_marginal_cdf(col, x), kernel_marginal_cdf(std_rows, c.bandwidth(), col, x), 1e-9);
        }
    for (double s : {-1.0, 0.3})
        for (double r : {-0.5, 1.1}) EXPECT_NEAR(c.joint_cdf(s, r), kernel_cdf(std_rows, c.bandwidth(), s, r), 1e-13);
}

TEST(KernelCopula, QuantileHitsTolerance) {
    const auto& c = gaussian_copula();
    for (double u : {1e-6, 0.001, 0.05, 0.3, 0.5, 0.77, 0.999, 1 - 1e-6})
        for (int col : {1, 2}) EXPECT_NEAR(c.marginal_cdf(col, c.quantile(col, u)), u, 1e-10);
    EXPECT_EQ(c.quantile(1, 0.0), c.quantile(1, 1e-6));
    EXPECT_EQ(c.quantile(1, 1.0), c.quantile(1, 1 - 1e-6));
    EXPECT_THROW(c.quantile(1, 1.5), domain_error);
}

TEST(KernelCopula, Axioms) {
    const auto& c = gaussian_copula();
    for (double u = 0.0; u <= 1.0; u += 0.05) {
        EXPECT_LE(copula_eval(c, 0.0, u), kBoundaryTol);
        EXPECT_LE(copula_eval(c, u, 0.0), kBoundaryTol);
        EXPECT_NEAR(copula_eval(c, 1.0, u), u, kBoundaryTol);
        EXPECT_NEAR(copula_eval(c, u, 1.0), u, kBoundaryTol);
    }
    EXPECT_GE(copula_eval(c, 1.0, 1.0), 1 - kBoundaryTol);
    const auto g = interior_grid();
    const auto grid = c.eval_grid(g, g);
    for (std::size_t i = 0; i + 1 < g.size(); ++i)
        for (std::size_t j = 0; j + 1 < g.size(); ++j) {
            EXPECT_GE(grid[i + 1][j + 1] - grid[i][j + 1] - grid[i + 1][j] + grid[i][j], -1e-9);
            EXPECT_LE(grid[i][j], grid[i + 1][j]);
            EXPECT_LE(grid[i][j], grid[i][j + 1]);
        }
    EXPECT_THROW(copula_eval(c, -0.1, 0.5), domain_error);
}

TEST(KernelCopula, ExchangeSymmetry) {
    auto base = generate_expert_matrix(GaussianCopula{0.5}, 500, 4).rows();
    std::vector<ExpertRow> sym(base);
    for (const auto& r : base) sym.push_back({r.q_inv, r.s_f});
    const KernelCopula c{ExpertMatrix(sym)};
    for (double u : {0.1, 0.35, 0.6, 0.9})
        for (double v : {0.2, 0.5, 0.85}) EXPECT_NEAR(copula_eval(c, u, v), copula_eval(c, v, u), 1e-9);
}

TEST(KernelCopula, MatchesAnalyticGaussianCopula) {
    const auto& c = gaussian_copula();
    const auto g = interior_grid();
    const auto grid = c.eval_grid(g, g);
    double worst = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            worst = std::max(worst, std::abs(grid[i][j] - oracle::gaussian_copula(g[i], g[j], -0.7)));
    EXPECT_LT(worst, 0.01);
}

TEST(KernelCopula, IncreasingMapInvariance) {
    std::vector<ExpertRow> mapped;
    for (const auto& r : gaussian_matrix().rows()) mapped.push_back({2500 * std::exp(0.5 * r.s_f), std::atan(r.q_inv)});
    const KernelCopula c2{ExpertMatrix(mapped)};
    const auto g = interior_grid();
    const auto a = gaussian_copula().eval_grid(g, g), b = c2.eval_grid(g, g);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(a[i][j], b[i][j], 0.01);
}

TEST(KernelCopula, BandwidthRobustness) {
    const auto& c = gaussian_copula();
    const KernelCopula half(gaussian_matrix(), 0.5 * c.bandwidth()), dbl(gaussian_matrix(), 2 * c.bandwidth());
    const auto g = interior_grid();
    const auto a = c.eval_grid(g, g), b = half.eval_grid(g, g), d = dbl.eval_grid(g, g);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            EXPECT_LT(std::abs(a[i][j] - b[i][j]), 0.02);
            EXPECT_LT(std::abs(a[i][j] - d[i][j]), 0.02);
        }
}

TEST(CopulaSample, MarginalUniformity) {
    const auto draws = copula_sample(gaussian_copula(), 100000, 31);
    std::vector<double> v1, v2;
    for (const auto& d : draws) {
        ASSERT_GT(d[0], 0.0);
        ASSERT_LT(d[0], 1.0);
        ASSERT_GT(d[1], 0.0);
        ASSERT_LT(d[1], 1.0);
        v1.push_back(d[0]);
        v2.push_back(d[1]);
    }
    for (auto* v : {&v1, &v2}) {
        std::sort(v->begin(), v->end());
        double sup = 0;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const double n = static_cast<double>(v->size());
            sup = std::max({sup, std::abs((*v)[i] - i / n), std::abs((*v)[i] - (i + 1) / n)});
        }
        EXPECT_LT(sup, 0.01);
    }
}

TEST(CopulaSample, NormalScoresCorrelationRecovered) {
    const auto draws = copula_sample(gaussian_copula(), 100000, 32);
    std::vector<double> a, b;
    for (const auto& d : draws) {
        a.push_back(norm_quantile(d[0]));
        b.push_back(norm_quantile(d[1]));
    }
    EXPECT_NEAR(stats::correlation(a, b), -0.7, 0.02);
}

TEST(CopulaSample, IndependentColumns) {
    const KernelCopula c(generate_expert_matrix(GaussianCopula{0.0}, 20000, 33));
    const auto draws = copula_sample(c, 100000, 34);
    std::vector<double> a, b;
    for (const auto& d : draws) {
        a.push_back(norm_quantile(d[0]));
        b.push_back(norm_quantile(d[1]));
    }
    EXPECT_NEAR(stats::correlation(a, b), 0.0, 0.02);
}

TEST(CopulaSample, EmpiricalCdfConvergesToEval) {
    const auto& c = gaussian_copula();
    const auto draws = copula_sample(c, 100000, 35);
    const auto g = interior_grid();
    const auto grid = c.eval_grid(g, g);
    for (std::size_t i = 0; i < g.size(); i += 2)
        for (std::size_t j = 0; j < g.size(); j += 2) {
            std::size_t count = 0;
            for (const auto& d : draws) count += (d[0] <= g[i] && d[1] <= g[j]);
            EXPECT_NEAR(static_cast<double>(count) / draws.size(), grid[i][j], 0.01);
        }
}

TEST(CopulaSample, DeterministicAndValidated) {
    const auto& c = gaussian_copula();
    EXPECT_EQ(copula_sample(c, 1000, 5), copula_sample(c, 1000, 5));
    EXPECT_THROW(copula_sample(c, 0, 5), domain_error);
}

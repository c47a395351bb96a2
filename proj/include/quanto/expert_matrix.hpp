#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "quanto/errors.hpp"
#include "quanto/key_value.hpp"
#include "quanto/normal.hpp"
#include "quanto/parallel.hpp"
#include "quanto/rng.hpp"
#include "quanto/stats.hpp"

namespace quanto {

struct ExpertRow {
    double s_f;
    double q_inv;
};

/// N x 2 dependence data: column 1 holds S_f(T) outcomes, column 2 holds
/// 1/Q(T) outcomes (any strictly increasing rescaling of either is allowed).
class ExpertMatrix {
public:
    static constexpr std::size_t kMinRows = 10;

    explicit ExpertMatrix(std::vector<ExpertRow> rows) : rows_(std::move(rows)) {
        detail::require(rows_.size() >= kMinRows, "expert matrix needs at least 10 rows, got " + std::to_string(rows_.size()));
        for (const auto& r : rows_) {
            detail::require_finite(r.s_f, "expert matrix entry");
            detail::require_finite(r.q_inv, "expert matrix entry");
        }
    }

    std::size_t size() const noexcept { return rows_.size(); }
    const std::vector<ExpertRow>& rows() const noexcept { return rows_; }
    const ExpertRow& operator[](std::size_t i) const noexcept { return rows_[i]; }

    std::vector<double> column(int c) const {
        std::vector<double> out(rows_.size());
        for (std::size_t i = 0; i < rows_.size(); ++i) out[i] = c == 1 ? rows_[i].s_f : rows_[i].q_inv;
        return out;
    }

private:
    std::vector<ExpertRow> rows_;
};

inline constexpr const char* kExpertCsvHeader = "s_f,q_inv";

/// Reads `s_f,q_inv` CSV. Errors carry the 1-based line number.
inline ExpertMatrix read_expert_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto strip_cr = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    };
    if (!std::getline(in, line)) throw parse_error("empty expert matrix file", 1);
    ++line_no;
    strip_cr(line);
    if (line != kExpertCsvHeader) throw parse_error("header must be exactly `s_f,q_inv`", line_no);
    std::vector<ExpertRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw parse_error("expected two comma-separated values", line_no);
        const double s = parse_double(std::string_view(line).substr(0, comma), "s_f", line_no);
        const double q = parse_double(std::string_view(line).substr(comma + 1), "q_inv", line_no);
        if (!std::isfinite(s) || !std::isfinite(q)) throw parse_error("non-finite value", line_no);
        rows.push_back({s, q});
    }
    return ExpertMatrix(std::move(rows));
}

inline ExpertMatrix load_expert_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open `" + path + "`");
    return read_expert_csv(in);
}

inline void write_expert_csv(std::ostream& out, const ExpertMatrix& m) {
    out << kExpertCsvHeader << '\n';
    for (const auto& r : m.rows()) out << format_double(r.s_f) << ',' << format_double(r.q_inv) << '\n';
}

// Parametric copulas used to synthesize expert data.

struct GaussianCopula {
    double rho;
};

struct StudentTCopula {
    double rho;
    double dof;
};

struct FrankCopula {
    double alpha;
};

using CopulaGenerator = std::variant<GaussianCopula, StudentTCopula, FrankCopula>;

inline void validate(const CopulaGenerator& g) {
    std::visit(
        [](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, GaussianCopula>) {
                detail::require(std::isfinite(c.rho) && c.rho > -1.0 && c.rho < 1.0, "gaussian copula rho must lie in (-1, 1)");
            } else if constexpr (std::is_same_v<T, StudentTCopula>) {
                detail::require(std::isfinite(c.rho) && c.rho > -1.0 && c.rho < 1.0, "t copula rho must lie in (-1, 1)");
                detail::require(std::isfinite(c.dof) && c.dof >= 1.0, "t copula dof must be >= 1");
            } else {
                detail::require(std::isfinite(c.alpha) && c.alpha != 0.0, "frank copula alpha must be finite and non-zero");
            }
        },
        g);
}

/// Frank conditional inverse: the v solving dC(u,v)/du = w.
inline double frank_conditional_inverse(double alpha, double u, double w) {
    const double y = w * std::expm1(-alpha) / (w + (1.0 - w) * std::exp(-alpha * u));
    return -std::log1p(y) / alpha;
}

/// Frank copula CDF C(u,v) = -1/a ln(1 + (e^{-au}-1)(e^{-av}-1)/(e^{-a}-1)).
inline double frank_cdf(double alpha, double u, double v) {
    return -std::log1p(std::expm1(-alpha * u) * std::expm1(-alpha * v) / std::expm1(-alpha)) / alpha;
}

namespace detail {

/// Normal score of a Student t variate, computed through the smaller tail.
inline double t_normal_score(const boost::math::students_t_distribution<double>& dist, double t) {
    if (t > 0.0) return norm_quantile_upper(boost::math::cdf(boost::math::complement(dist, t)));
    return norm_quantile(boost::math::cdf(dist, t));
}

}  // namespace detail

/// n rows of copula draws mapped to normal scores Phi^{-1}(u). Row i uses
/// substream i of the seed, so the matrix does not depend on worker count.
inline ExpertMatrix generate_expert_matrix(const CopulaGenerator& gen, std::size_t n, std::uint64_t seed) {
    validate(gen);
    detail::require(n >= ExpertMatrix::kMinRows, "expert matrix needs at least 10 rows, got " + std::to_string(n));
    std::vector<ExpertRow> rows(n);
    const rng::CounterRng rng(seed);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::visit(
            [&](const auto& c) {
                using T = std::decay_t<decltype(c)>;
                for (std::size_t i = begin; i < end; ++i) {
                    if constexpr (std::is_same_v<T, GaussianCopula>) {
                        const auto [z1, z2] = rng.normals(i, 0, 0);
                        rows[i] = {z1, c.rho * z1 + std::sqrt(1.0 - c.rho * c.rho) * z2};
                    } else if constexpr (std::is_same_v<T, StudentTCopula>) {
                        const auto [z1, z2] = rng.normals(i, 0, 0);
                        rng::SubstreamEngine engine(rng, i, 0, 1);
                        std::gamma_distribution<double> chi2(0.5 * c.dof, 2.0);
                        const double scale = std::sqrt(c.dof / chi2(engine));
                        const double y2 = c.rho * z1 + std::sqrt(1.0 - c.rho * c.rho) * z2;
                        const boost::math::students_t_distribution<double> dist(c.dof);
                        rows[i] = {detail::t_normal_score(dist, z1 * scale), detail::t_normal_score(dist, y2 * scale)};
                    } else {
                        const auto [u, w] = rng.uniforms(i, 0, 0);
                        const double v = frank_conditional_inverse(c.alpha, u, w);
                        rows[i] = {norm_quantile(u), norm_quantile(std::clamp(v, 0x1.0p-60, 1.0 - 0x1.0p-53))};
                    }
                }
            },
            gen);
    });
    return ExpertMatrix(std::move(rows));
}

/// Pearson correlation of the normal scores of n Frank(alpha) draws. Draws
/// come from the seed's substreams, so repeated calls with the same seed use
/// common random numbers.
class FrankScoreCorrelation {
public:
    FrankScoreCorrelation(std::size_t n, std::uint64_t seed) : u_(n), w_(n), score_u_(n) {
        const rng::CounterRng rng(seed);
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                std::tie(u_[i], w_[i]) = rng.uniforms(i, 0, 0);
                score_u_[i] = norm_quantile(u_[i]);
            }
        });
    }

    double operator()(double alpha) const {
        std::vector<double> score_v(u_.size());
        parallel_for(u_.size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double v = frank_conditional_inverse(alpha, u_[i], w_[i]);
                score_v[i] = norm_quantile(std::clamp(v, 0x1.0p-60, 1.0 - 0x1.0p-53));
            }
        });
        return stats::correlation(score_u_, score_v);
    }

private:
    std::vector<double> u_, w_, score_u_;
};

/// Frank alpha whose normal-scores correlation matches target_rho within
/// 0.005 on a 10^6-draw sample. Bisection over [-50, 50] (sign fixed by the
/// target) with common random numbers across iterations.
inline double calibrate_frank_alpha(double target_rho, std::uint64_t seed, std::size_t n_draws = 1'000'000) {
    detail::require_finite(target_rho, "target correlation");
    detail::require(target_rho != 0.0, "target correlation 0 is the independence limit; Frank alpha = 0 is excluded");
    detail::require(target_rho > -0.95 && target_rho < 0.95, "target correlation must lie in (-0.95, 0.95)");
    const FrankScoreCorrelation corr(n_draws, seed);
    double lo = target_rho < 0.0 ? -50.0 : 1e-9;
    double hi = target_rho < 0.0 ? -1e-9 : 50.0;
    double f_lo = corr(lo) - target_rho, f_hi = corr(hi) - target_rho;
    if (f_lo > 0.0 || f_hi < 0.0) throw convergence_error("target correlation not attainable by Frank alpha in [-50, 50]");
    double best = lo, best_err = std::abs(f_lo);
    if (std::abs(f_hi) < best_err) best = hi, best_err = std::abs(f_hi);
    for (int iter = 0; iter < 100 && best_err > 1e-5 && hi - lo > 1e-9; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = corr(mid) - target_rho;
        if (std::abs(f_mid) < best_err) best = mid, best_err = std::abs(f_mid);
        (f_mid < 0.0 ? lo : hi) = mid;
    }
    if (best_err > 0.005) throw convergence_error("Frank calibration missed the target by more than 0.005");
    return best;
}

}  // namespace quanto

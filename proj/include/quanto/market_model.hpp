#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "quanto/errors.hpp"
#include "quanto/key_value.hpp"

namespace quanto {

/// Shared economic environment. Rates are continuously compounded per-year
/// decimals. q0 is quoted DOM per FOR; q_fix is the contractual conversion
/// rate applied to the payoff.
class MarketConfig {
public:
    MarketConfig(double rho_sf_qinv, double q0, double s0, double r, double rf, double q_fix)
        : rho_sf_qinv_(rho_sf_qinv), q0_(q0), s0_(s0), r_(r), rf_(rf), q_fix_(q_fix) {
        for (auto [v, name] : {std::pair{rho_sf_qinv, "rho_sf_qinv"}, {q0, "q0"}, {s0, "s0"}, {r, "r"},
                               {rf, "rf"}, {q_fix, "q_fix"}})
            detail::require_finite(v, name);
        detail::require(rho_sf_qinv >= -1.0 && rho_sf_qinv <= 1.0, "rho_sf_qinv must lie in [-1, 1]");
        detail::require(q0 > 0.0, "q0 must be positive");
        detail::require(s0 > 0.0, "s0 must be positive");
        detail::require(q_fix > 0.0, "q_fix must be positive");
    }

    /// Correlation -0.7, Q(0) = 3.1, S_f(0) = 2500, r = 0.1, r_f = 0.01, q = 3.
    static MarketConfig reference() { return {-0.7, 3.1, 2500.0, 0.1, 0.01, 3.0}; }

    static constexpr std::array<std::string_view, 6> kKeys{"rho_sf_qinv", "q0", "s0", "r", "rf", "q_fix"};

    static MarketConfig from_key_values(const KeyValueFile& kv) {
        for (const auto& e : kv.entries) {
            bool known = false;
            for (auto k : kKeys) known = known || e.key == k;
            if (!known) throw parse_error("unknown config key `" + e.key + "`", e.line);
        }
        std::string missing;
        for (auto k : kKeys)
            if (!kv.find(k)) missing += (missing.empty() ? "" : ", ") + std::string(k);
        if (!missing.empty()) throw parse_error("missing config keys: " + missing);
        auto get = [&](std::string_view k) {
            const auto* e = kv.find(k);
            return parse_double(e->value, k, e->line);
        };
        return {get("rho_sf_qinv"), get("q0"), get("s0"), get("r"), get("rf"), get("q_fix")};
    }

    static MarketConfig load(const std::string& path) { return from_key_values(read_key_values(path)); }

    void append_to(KeyValueFile& kv) const {
        kv.set("rho_sf_qinv", format_double(rho_sf_qinv_));
        kv.set("q0", format_double(q0_));
        kv.set("s0", format_double(s0_));
        kv.set("r", format_double(r_));
        kv.set("rf", format_double(rf_));
        kv.set("q_fix", format_double(q_fix_));
    }

    double rho_sf_qinv() const noexcept { return rho_sf_qinv_; }
    double q0() const noexcept { return q0_; }
    double qinv0() const noexcept { return 1.0 / q0_; }
    double s0() const noexcept { return s0_; }
    double r() const noexcept { return r_; }
    double rf() const noexcept { return rf_; }
    double q_fix() const noexcept { return q_fix_; }

private:
    double rho_sf_qinv_, q0_, s0_, r_, rf_, q_fix_;
};

/// Heston parameter vector, ordered (rho, kappa, v_bar, v0, eta).
class HestonParams {
public:
    HestonParams(double rho_sv, double kappa, double v_bar, double v0, double eta)
        : rho_sv_(rho_sv), kappa_(kappa), v_bar_(v_bar), v0_(v0), eta_(eta) {
        for (auto [v, name] :
             {std::pair{rho_sv, "rho"}, {kappa, "kappa"}, {v_bar, "v_bar"}, {v0, "v0"}, {eta, "eta"}})
            detail::require_finite(v, name);
        detail::require(rho_sv >= -1.0 && rho_sv <= 1.0, "Heston rho must lie in [-1, 1]");
        detail::require(kappa >= 0.0, "Heston kappa must be >= 0");
        detail::require(v_bar >= 0.0, "Heston v_bar must be >= 0");
        detail::require(v0 >= 0.0, "Heston v0 must be >= 0");
        detail::require(eta >= 0.0, "Heston eta must be >= 0");
    }

    /// Parses "rho,kappa,v_bar,v0,eta".
    static HestonParams parse(std::string_view text) {
        std::vector<double> v;
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto comma = text.find(',', start);
            const auto end = comma == std::string_view::npos ? text.size() : comma;
            v.push_back(parse_double(text.substr(start, end - start), "Heston parameter"));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (v.size() != 5) throw parse_error("Heston parameters need 5 comma-separated values (rho,kappa,v_bar,v0,eta)");
        return {v[0], v[1], v[2], v[3], v[4]};
    }

    std::string to_string() const {
        return format_double(rho_sv_) + "," + format_double(kappa_) + "," + format_double(v_bar_) + "," +
               format_double(v0_) + "," + format_double(eta_);
    }

    /// True when the variance never moves: kappa*(v_bar - v) and eta both vanish.
    bool frozen_variance() const noexcept { return eta_ == 0.0 && (kappa_ == 0.0 || v_bar_ == v0_); }

    double rho_sv() const noexcept { return rho_sv_; }
    double kappa() const noexcept { return kappa_; }
    double v_bar() const noexcept { return v_bar_; }
    double v0() const noexcept { return v0_; }
    double eta() const noexcept { return eta_; }

private:
    double rho_sv_, kappa_, v_bar_, v0_, eta_;
};

class ContractSpec {
public:
    ContractSpec(double strike, double maturity) : strike_(strike), maturity_(maturity) {
        detail::require_finite(strike, "strike");
        detail::require_finite(maturity, "maturity");
        detail::require(strike > 0.0, "strike must be positive");
        detail::require(maturity > 0.0, "maturity must be positive");
    }

    double strike() const noexcept { return strike_; }
    double maturity() const noexcept { return maturity_; }

private:
    double strike_, maturity_;
};

/// Domestic-currency payoff q_fix * max(S_f(T) - K, 0).
inline double quanto_payoff(double s_f_T, double strike, double q_fix) {
    detail::require_finite(s_f_T, "s_f_T");
    detail::require_finite(strike, "strike");
    detail::require_finite(q_fix, "q_fix");
    detail::require(q_fix > 0.0, "q_fix must be positive");
    return q_fix * std::max(s_f_T - strike, 0.0);
}

/// Correlation of S_f with Q given its correlation with 1/Q: the sign flips.
inline double rho_domestic_from_foreign(double rho_sf_qinv) {
    detail::require_finite(rho_sf_qinv, "correlation");
    detail::require(rho_sf_qinv >= -1.0 && rho_sf_qinv <= 1.0, "correlation must lie in [-1, 1]");
    return -rho_sf_qinv;
}

}  // namespace quanto

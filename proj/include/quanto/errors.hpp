#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace quanto {

// Precondition or invariant violation on an input value.
class domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Root search target lies outside the attainable range.
class no_solution_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class convergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed text input (config, CSV). Carries the 1-based line when known.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw domain_error(msg);
}

inline void require_finite(double x, const char* name) {
    if (!std::isfinite(x))
        throw domain_error(std::string(name) + " must be finite");
}

}  // namespace detail
}  // namespace quanto

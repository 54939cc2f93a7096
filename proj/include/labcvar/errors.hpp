#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace labcvar {

/**
 * Thrown when a requested configuration is internally consistent but
 * infeasible, e.g. per-class weight bounds whose box cannot contain a
 * probability vector. When the feasible scale interval is known it is
 * attached so callers can report how to repair the configuration.
 */
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
    ConfigError(const std::string& what, double feasible_lo, double feasible_hi)
        : std::runtime_error(what), feasible_lo_(feasible_lo), feasible_hi_(feasible_hi) {}

    bool has_feasible_range() const { return feasible_lo_.has_value(); }
    double feasible_lo() const { return *feasible_lo_; }
    double feasible_hi() const { return *feasible_hi_; }

private:
    std::optional<double> feasible_lo_;
    std::optional<double> feasible_hi_;
};

/// Thrown by file ingestion when the input text cannot be parsed.
/// `line` is 1-based and includes any header line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

} // namespace labcvar

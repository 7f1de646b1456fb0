#pragma once

#include <stdexcept>
#include <string>

namespace ckmr {

// Bad user input: malformed CSV cells, unknown columns, inconsistent grouping.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration: out-of-range hyperparameters, impossible chain settings.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical breakdown that survives the jitter escalation schedule.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ckmr

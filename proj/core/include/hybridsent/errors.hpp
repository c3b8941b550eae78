#pragma once

#include <stdexcept>
#include <string>

namespace hybridsent {

// Shape/dimension violations in tensor math or model wiring.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input artifacts (datasets, vocab, weight files).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied configuration (hyperparameters, wiring constraints).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures: divergence, non-finite losses, Cholesky breakdown.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hybridsent

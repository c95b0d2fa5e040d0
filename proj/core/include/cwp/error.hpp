#pragma once

#include <stdexcept>
#include <string>

namespace cwp {

// Bad parameters or configuration: maps to exit code 2 in the CLI.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Enumeration or allocation request above the configured budget.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure: degenerate Hessian, insufficient grid coverage, too few samples.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateHessian : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace cwp

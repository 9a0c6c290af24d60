#pragma once

#include <stdexcept>
#include <string>

namespace lab {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A band or level is too thin for the grid to resolve.
struct ResolutionError : NumericError {
    using NumericError::NumericError;
};

struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lab

#pragma once

#include <stdexcept>
#include <string>

namespace rofsl {

/// Operands of incompatible length were combined.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A user-supplied parameter is outside its valid range. The message names
/// the offending key and the constraint it violates.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The server gradient is (numerically) zero, so no direction-based filter
/// can be evaluated.
class DegenerateGradientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model parameter became NaN or infinite during training.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rofsl

#pragma once

#include <stdexcept>
#include <string>

namespace fdd {

/// Shapes that do not line up (batch widths, parameter lengths).
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// A NaN or infinity showed up where finite values are required.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation called out of order, e.g. backward() without forward().
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& what) : std::logic_error(what) {}
};

/// Bad user-supplied data: labels out of range, malformed CSV, infeasible splits.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Training produced a non-finite loss or activation.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fdd

#pragma once

#include <stdexcept>
#include <string>

namespace otvq {

// Input extents do not satisfy an operation's shape rule.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced or consumed where finite values are required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid argument values that are not shape related (bad marginals, empty inputs...).
struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed on-disk data (IDX files, checkpoints).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace otvq

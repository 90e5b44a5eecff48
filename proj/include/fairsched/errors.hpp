#pragma once

#include <stdexcept>
#include <string>

namespace fairsched {

/// Malformed arguments: dimension mismatches, out-of-range values, broken invariants.
class InvalidInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A solver was asked for a problem size it refuses (e.g. exhaustive enumeration past n=9).
class SizeLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// I/O and schema problems in data files; messages carry file/line context.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration, e.g. a conditional probability table that does not sum to one.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numeric failure during training or evaluation (NaN loss, degenerate metric).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fairsched

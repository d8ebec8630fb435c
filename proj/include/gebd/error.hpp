#pragma once

#include <stdexcept>
#include <string>

namespace gebd {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes that cannot be combined by an operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (bad K, non-divisible groups, even kernel, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Invalid input data (empty sequences, out-of-range indices, bad annotations).
class InputError : public Error {
public:
    using Error::Error;
};

/// API misuse (backward on a non-scalar, slice index out of range, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Non-finite values encountered during optimization.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace gebd

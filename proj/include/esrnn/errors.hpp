#pragma once

#include <stdexcept>
#include <string>

namespace esrnn {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV cell that is not a number, truncated row, ...).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally valid input with an illegal value (unknown category,
/// duplicate id, non-positive observation, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Operand dimensions do not match the operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A series is too short for the requested split/window/forecast.
class InsufficientLengthError : public Error {
public:
    using Error::Error;
};

/// A numeric quantity left its legal domain (non-positive level, ...).
class NumericDomainError : public Error {
public:
    using Error::Error;
};

/// Bad configuration: unknown key, out-of-range setting, inconsistent profile.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An API precondition was violated (backward on a non-scalar, all-zero mask).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Batched and looped training paths disagreed; timing claims are withheld.
class EquivalenceError : public Error {
public:
    using Error::Error;
};

/// Checkpoint content incompatible with the active configuration.
class CheckpointError : public Error {
public:
    using Error::Error;
};

} // namespace esrnn

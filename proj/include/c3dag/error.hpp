#pragma once

#include <stdexcept>
#include <string>

namespace c3dag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values (empty ranges, non-positive sizes, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed document. The message names the offending field.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A skeleton bone whose endpoints coincide.
class DegenerateBoneError : public Error {
public:
    using Error::Error;
};

/// Non-finite values produced during optimization.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Caller broke an API contract (e.g. mismatched retained render state).
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace c3dag

#pragma once

#include <stdexcept>
#include <string>

namespace vqg {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input document (bad timestamp, missing field, bad JSON).
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally valid input that violates a domain invariant
// (overlapping chapters, duplicate ids, empty candidate list).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Inconsistent or incomplete configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Tensor/vector dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Numeric argument outside the operation's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Operation requires a trained/loaded model that is not available.
class NotReadyError : public Error {
public:
    using Error::Error;
};

// External provider failed after retries.
class ProviderError : public Error {
public:
    using Error::Error;
};

} // namespace vqg

#pragma once

#include <stdexcept>
#include <string>

namespace pdfd {

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/graph shape violations (wrong dims, wrong rank, bad node wiring).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed input files (word vectors, taxonomy, feature files, checkpoints).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Bad run configuration: unknown keys, out-of-range values, missing paths.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Well-formed but unusable data (truncated payload, label out of range, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Zero-shot contract breaches: an unseen-class sample where only seen
/// classes are allowed, or vice versa.
class ContractViolation : public Error {
public:
    using Error::Error;
};

} // namespace pdfd

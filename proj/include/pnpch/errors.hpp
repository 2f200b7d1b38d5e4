#pragma once

#include <stdexcept>
#include <string>

namespace pnpch {

/// Base of every error raised by the library. The category decides the CLI
/// exit code.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent run configuration (exit code 2).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// A solver failed: divergence, step collapse, positivity loss (exit code 3).
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// The request is not meaningful for the given model parameters, e.g. an
/// onset was requested below the instability threshold (exit code 4).
class ModelError : public Error {
  public:
    using Error::Error;
};

}  // namespace pnpch

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bax {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatch, out-of-range parameters.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (infeasible ABC ball size, zero noise for EIG_f, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied function broke a documented contract (e.g. a negative edge cost).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Destination vertex cannot be reached from the source.
class NoPathError : public Error {
 public:
  using Error::Error;
};

/// Text or file parse failure. `where` is a line number or a key path.
class ParseError : public Error {
 public:
  ParseError(std::string where, const std::string& message)
      : Error(where.empty() ? message : where + ": " + message), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Cholesky factorization failed even after jitter escalation.
class NumericalError : public Error {
 public:
  struct Diagnostics {
    std::size_t matrix_size = 0;
    double last_jitter = 0.0;
    double min_diagonal = 0.0;
    double max_diagonal = 0.0;
  };

  NumericalError(const std::string& message, Diagnostics diagnostics)
      : Error(message), diagnostics_(diagnostics) {}

  const Diagnostics& diagnostics() const noexcept { return diagnostics_; }

 private:
  Diagnostics diagnostics_;
};

}  // namespace bax

#pragma once

// Shared error taxonomy and small helpers used across the library.
//
// Errors are exceptions rooted at arguq::Error so callers can catch the
// whole family or pick the precise failure class they care about.

#include <cmath>
#include <stdexcept>
#include <string>

namespace arguq {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric or argument value violates a documented precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A tree or record is malformed (duplicate ids, depth overflow, ...).
class StructureError : public Error {
 public:
  using Error::Error;
};

// Bad configuration detected at startup, before any work is attempted.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data files (datasets, run files, CSV grids) are unreadable or invalid.
class DataError : public Error {
 public:
  using Error::Error;
};

// Output could not be written.
class IoError : public Error {
 public:
  using Error::Error;
};

// A run file carries an unknown schema version.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Transport-level backend failure (after retries were exhausted).
class GatewayError : public Error {
 public:
  using Error::Error;
};

// The backend answered, but not in the shape the wire protocol promises.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A requested feature is not supported by the configured backend,
// e.g. sequence log-probabilities needed by semantic entropy.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Throws DomainError unless v lies in [0,1]; NaN never passes.
inline double require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0,1], got " +
                      std::to_string(v));
  }
  return v;
}

}  // namespace arguq

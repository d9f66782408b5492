#pragma once

#include <stdexcept>
#include <string>

namespace kcsc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (dataset, constraint file, partition, cache).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid or self-inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A precondition on numeric inputs was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Must-link chain connecting the two endpoints of a cannot-link pair.
class InconsistentConstraints : public Error {
 public:
  InconsistentConstraints(long i, long j)
      : Error("inconsistent constraints: cannot-link pair (" + std::to_string(i) + ", " +
              std::to_string(j) + ") is joined by a must-link path"),
        first(i),
        second(j) {}

  long first;
  long second;
};

}  // namespace kcsc

#pragma once

#include <stdexcept>
#include <string>

namespace wqlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Marginals of a transport problem do not carry equal mass.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A problem exceeds a configured size cap (atoms, edges).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// The operation does not support this measure family or input shape.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// A target measure charges a set on which the reference measure vanishes.
class SupportViolationError : public Error {
 public:
  using Error::Error;
};

class ArityError : public Error {
 public:
  using Error::Error;
};

/// Parameters fall outside the regime where a constant is defined.
class RegimeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class IncompleteDataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or measure description.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wqlab

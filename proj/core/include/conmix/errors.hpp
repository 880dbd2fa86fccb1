#ifndef CONMIX_ERRORS_HPP
#define CONMIX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace conmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Requested combination or size is not supported.
class UnsupportedError : public Error {
public:
  using Error::Error;
};

/// Exact-integer or floating overflow guard tripped.
class OverflowError : public Error {
public:
  using Error::Error;
};

/// A moment does not exist for the given parameters.
class NonexistenceError : public Error {
public:
  using Error::Error;
};

/// Dataset / spec / config validation failure.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Numerical evaluation failed (non-finite integrand, singular system, ...).
class NumericError : public Error {
public:
  using Error::Error;
};

/// Optimizer could not produce any usable result.
class FitError : public Error {
public:
  using Error::Error;
};

} // namespace conmix

#endif

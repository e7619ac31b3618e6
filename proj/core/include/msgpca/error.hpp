#pragma once

#include <stdexcept>
#include <string>

namespace msgpca {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// A constraint set that cannot be reached from the given input (e.g. k > d).
class Infeasible : public Error {
 public:
  using Error::Error;
};

// Zero mass for an entropic projection, collapsed power-method columns, ...
class DegenerateState : public Error {
 public:
  using Error::Error;
};

class StreamExhausted : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// Data ingestion failures. Subclasses distinguish the IDX failure modes.
class DataError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedFile : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedElementType : public DataError {
 public:
  using DataError::DataError;
};

// Malformed or inconsistent experiment spec file.
class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace msgpca

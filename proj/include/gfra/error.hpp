#pragma once

#include <stdexcept>
#include <string>

namespace gfra {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter set violates one of its invariants.
class InvalidParams : public Error {
 public:
  using Error::Error;
};

// An argument lies outside the domain where a formula is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Structurally incompatible arguments (e.g. CDFs on different grids).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A linear system or estimator cannot be solved for the given input.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gfra

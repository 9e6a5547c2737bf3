#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace odm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed LIBSVM input. Carries the 1-based physical line number.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Raised when a linear solve meets a matrix that is singular to working precision.
class SingularMatrixError : public Error {
public:
  SingularMatrixError(const std::string& what, double rcond)
      : Error(what + " (reciprocal condition estimate " + std::to_string(rcond) + ")"),
        rcond_(rcond) {}

  double rcond() const noexcept { return rcond_; }

private:
  double rcond_;
};

/// A coordinate subproblem with zero curvature and a descent direction towards +inf.
class UnboundedProblemError : public Error {
public:
  using Error::Error;
};

class DivergenceError : public Error {
public:
  using Error::Error;
};

class ModelFormatError : public Error {
public:
  using Error::Error;
};

}  // namespace odm

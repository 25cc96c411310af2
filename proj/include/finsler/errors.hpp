#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A support element or stencil point outside the metric's domain, or v = 0.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid metric parameters (e.g. Randers drift with norm >= 1).
class ParameterError : public Error {
 public:
  ParameterError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Malformed metric specification document.
class SpecParseError : public Error {
 public:
  SpecParseError(int line, std::string field, const std::string& what)
      : Error(what), line_(line), field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// Requested derivative orders exceed what the jet engine supports.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Singular fundamental tensor, degenerate flag, step underflow and similar.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its stated precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace finsler

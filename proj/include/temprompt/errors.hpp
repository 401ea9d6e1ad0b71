#pragma once

#include <stdexcept>
#include <string>

namespace temprompt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (bad JSON, missing field, wrong type).
class LoadError : public Error {
  public:
    using Error::Error;
};

/// A record carries a label the governing schema does not define.
class SchemaMismatchError : public Error {
  public:
    using Error::Error;
};

/// A value violates a domain invariant (span out of range, duplicate id, ...).
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Verbalizer words that cannot be bound to single vocabulary tokens.
class BindingError : public Error {
  public:
    using Error::Error;
};

/// A surface span maps to no tokens.
class AlignmentError : public Error {
  public:
    using Error::Error;
};

/// A rendered prompt is longer than the backend accepts.
class TruncationError : public Error {
  public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
  public:
    DivergenceError(const std::string &what, long last_finite_step)
        : Error(what), last_finite_step_(last_finite_step) {}

    [[nodiscard]] long last_finite_step() const noexcept { return last_finite_step_; }

  private:
    long last_finite_step_;
};

}  // namespace temprompt

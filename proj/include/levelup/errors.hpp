#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace levelup {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A spec or config value failed validation. Carries the offending field name
// so callers (and the CLI) can point at the exact key.
class ValidationError : public Error {
public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

// File read/write/parse failure.
class IoError : public Error {
public:
  using Error::Error;
};

// Non-finite value produced by numeric code (diverged training, bad input).
class NumericError : public Error {
public:
  using Error::Error;
};

// A model series could not be constructed or violates its definition.
class SeriesError : public Error {
public:
  using Error::Error;
};

}  // namespace levelup

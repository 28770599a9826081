#pragma once

#include <stdexcept>
#include <string>

namespace hppmx {

// Exception hierarchy. The CLI maps these onto process exit codes:
// IoError -> 1, ParseError / ValidationError / std::invalid_argument /
// std::domain_error -> 2, NumericalError -> 3.

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Raised when the sampler reaches a non-finite or non-positive-definite state.
// `dump` carries a serialized copy of the offending iterate when available.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::string dump = {})
      : std::runtime_error(what), dump_(std::move(dump)) {}

  const std::string& dump() const noexcept { return dump_; }

 private:
  std::string dump_;
};

}  // namespace hppmx

#pragma once

#include <stdexcept>
#include <string>

namespace mest {

/// Invalid argument to a numerical routine (bad parameters, non-finite input).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A link produced an invalid family parameter while generating data.
class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}
  [[nodiscard]] std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// A criterion returned NaN or +inf. Distinct from -inf, which means "outside support".
class NonFiniteCriterionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or config; carries the 1-based line (0 if unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mest

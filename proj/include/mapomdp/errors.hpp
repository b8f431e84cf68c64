#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mapomdp {

/// Model data violates an invariant (stochasticity, ranges, dimensions).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model file. Carries the 1-based position of the offending token.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A configured size or work cap was exceeded (grid state cap, oracle node budget).
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The basis matrix is too ill-conditioned to produce reliable coefficients.
class DegenerateBasisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mapomdp

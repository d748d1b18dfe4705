#pragma once

#include <stdexcept>
#include <string>

namespace mma {

// Raised when a query would exceed the oracle budget. The attack loop treats
// this as a stop signal rather than a hard failure.
class BudgetExhausted : public std::runtime_error {
 public:
  explicit BudgetExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Raised on malformed files (bad magic, truncation, shape mismatch).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mma

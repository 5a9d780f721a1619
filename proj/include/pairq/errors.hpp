#pragma once

#include <stdexcept>
#include <string>

namespace pairq {

// Bad input: malformed records, violated invariants, inconsistent shapes.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or parameters, failed gradient checks.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pairq

#pragma once

#include <stdexcept>

namespace plateprice {

// Bad input: malformed files, invalid plates, shape mismatches. CLI maps this
// to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: divergence, non-finite values. CLI maps this to exit
// code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace plateprice

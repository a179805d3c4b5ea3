#pragma once

#include <stdexcept>
#include <string>

namespace attloc {

// Bad input files, formats, manifests. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values, failed numeric checks. CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace attloc

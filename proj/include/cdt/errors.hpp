#pragma once

#include <stdexcept>
#include <string>

namespace cdt {

// Invalid or malformed input data (bad CSV, non-binary treatment, NaNs...).
// The command line maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Estimation became impossible (empty arm after resampling, too few rows
// for a regression...). The command line maps this to exit code 3.
struct EstimationError : std::runtime_error {
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cdt

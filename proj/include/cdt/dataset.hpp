#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cdt {

// A complete experiment table: covariates x (row-major n x p), outcome y,
// binary treatment z. Covariates must already be numeric; encode categories
// upstream. Column names are kept for rule rendering and reports.
struct Dataset {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<int> z;
  std::vector<std::string> columns;  // size p
  std::vector<std::string> ids;      // optional, empty or size n

  double xat(std::size_t i, std::size_t j) const { return x[i * p + j]; }
  const double* row(std::size_t i) const { return x.data() + i * p; }

  std::size_t arm_count(int arm) const {
    std::size_t c = 0;
    for (int zi : z)
      if (zi == arm) ++c;
    return c;
  }

  Dataset subset(const std::vector<std::size_t>& rows) const;
};

// Throws DataError naming the first offending coordinate: size mismatches,
// non-binary z, non-finite values, empty table.
void validate_dataset(const Dataset& ds);

}  // namespace cdt

#pragma once

#include <cstddef>
#include <vector>

namespace cdt {

// Dense symmetric positive semi-definite solve via LDL^T with pivot
// screening. Columns whose pivot falls below tol * diag are treated as
// collinear with earlier columns: their coefficient is forced to zero and
// the column index is reported in dropped. Enough linear algebra for the
// logistic and weighted least squares fits here; no general matrix library
// is warranted for two small regressions.
struct GramSolve {
  std::vector<double> coef;        // size p, zeros at dropped positions
  std::vector<std::size_t> dropped;
  std::vector<double> inverse;     // p x p row-major pseudo-inverse of the
                                   // Gram matrix (zero rows/cols at dropped)
};

// Solves G x = b where G is p x p symmetric PSD (row-major).
GramSolve solve_gram(const std::vector<double>& gram, const std::vector<double>& rhs,
                     std::size_t p, double tol = 1e-10);

}  // namespace cdt

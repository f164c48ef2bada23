#include "cdt/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace cdt {

GramSolve solve_gram(const std::vector<double>& gram, const std::vector<double>& rhs,
                     std::size_t p, double tol) {
  if (gram.size() != p * p || rhs.size() != p)
    throw std::invalid_argument("solve_gram: dimension mismatch");

  // Incremental Cholesky over the columns kept so far; a column whose
  // residual pivot is tiny relative to its diagonal adds no information
  // beyond the earlier columns and gets dropped.
  GramSolve out;
  std::vector<std::size_t> kept;
  std::vector<double> L(p * p, 0.0);  // rows indexed by kept position, stride p
  for (std::size_t j = 0; j < p; ++j) {
    const std::size_t k = kept.size();
    std::vector<double> row(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      double s = gram[kept[i] * p + j];
      for (std::size_t m = 0; m < i; ++m) s -= L[i * p + m] * row[m];
      row[i] = s / L[i * p + i];
    }
    double pivot = gram[j * p + j];
    for (std::size_t i = 0; i < k; ++i) pivot -= row[i] * row[i];
    const double scale = gram[j * p + j];
    if (!(pivot > tol * (scale > 0 ? scale : 1.0))) {
      out.dropped.push_back(j);
      continue;
    }
    for (std::size_t i = 0; i < k; ++i) L[k * p + i] = row[i];
    L[k * p + k] = std::sqrt(pivot);
    kept.push_back(j);
  }

  const std::size_t k = kept.size();
  std::vector<double> y(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double s = rhs[kept[i]];
    for (std::size_t m = 0; m < i; ++m) s -= L[i * p + m] * y[m];
    y[i] = s / L[i * p + i];
  }
  std::vector<double> x(k, 0.0);
  for (std::size_t ii = k; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t m = ii + 1; m < k; ++m) s -= L[m * p + ii] * x[m];
    x[ii] = s / L[ii * p + ii];
  }

  out.coef.assign(p, 0.0);
  for (std::size_t i = 0; i < k; ++i) out.coef[kept[i]] = x[i];

  // (L L^T)^-1 for the kept block via L^-1, zero rows/cols elsewhere.
  std::vector<double> Linv(k * k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    Linv[c * k + c] = 1.0 / L[c * p + c];
    for (std::size_t r = c + 1; r < k; ++r) {
      double s = 0.0;
      for (std::size_t m = c; m < r; ++m) s -= L[r * p + m] * Linv[m * k + c];
      Linv[r * k + c] = s / L[r * p + r];
    }
  }
  out.inverse.assign(p * p, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t m = (i > j ? i : j); m < k; ++m)
        s += Linv[m * k + i] * Linv[m * k + j];
      out.inverse[kept[i] * p + kept[j]] = s;
    }
  return out;
}

}  // namespace cdt

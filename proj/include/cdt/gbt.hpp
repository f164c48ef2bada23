#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cdt/tree.hpp"

namespace cdt {

struct GbtParams {
  std::size_t n_rounds = 200;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  double subsample = 1.0;  // fraction of rows per round, without replacement
  std::uint64_t seed = 0;
};

struct GbtModel {
  double base = 0.0;  // weighted target mean
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::size_t p = 0;

  double predict_row(const double* row) const {
    double f = base;
    for (const RegressionTree& t : trees) f += learning_rate * t.predict_row(row);
    return f;
  }
  std::vector<double> predict(const double* x, std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = predict_row(x + i * p);
    return out;
  }
};

// Stagewise least squares: shallow trees fit to residuals, optionally on a
// seeded per-round row subsample, optionally weighted.
GbtModel fit_gbt(const double* x, std::size_t n, std::size_t p,
                 const std::vector<double>& y, const GbtParams& params,
                 const std::vector<double>* weights = nullptr);

}  // namespace cdt

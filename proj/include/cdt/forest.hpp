#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cdt/tree.hpp"

namespace cdt {

struct ForestParams {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;            // 0 = ceil(p / 3)
  double sample_fraction = 1.0;    // 1.0 = bootstrap; < 1 subsamples without replacement
  // Honest leaf estimation: grow each tree on half of its bag, then replace
  // the leaf means with means computed from the held-back half. Leaves the
  // splits alone, so spurious structure shrinks toward zero while real
  // structure keeps its levels.
  bool honest = false;
  TreeParams tree{.min_leaf = 5, .min_split = 10, .max_depth = 30};
  std::uint64_t seed = 0;
};

struct Forest {
  std::vector<RegressionTree> trees;
  std::vector<std::vector<char>> inbag;  // per tree, per training row
  std::size_t n_train = 0;
  std::size_t p = 0;
};

struct OobResult {
  std::vector<double> pred;
  // Rows that landed in every bag fall back to the all-tree prediction.
  std::vector<char> fallback;
  std::size_t fallback_count = 0;
};

// Bootstrap-aggregated regression trees with per-split feature subsampling.
Forest fit_forest(const double* x, std::size_t n, std::size_t p,
                  const std::vector<double>& y, const ForestParams& params,
                  std::size_t threads = 0);

double predict_forest_row(const Forest& forest, const double* row);
std::vector<double> predict_forest(const Forest& forest, const double* x, std::size_t n);

// Out-of-bag predictions for the training rows the forest was fit on; x must
// be the training matrix.
OobResult oob_predict(const Forest& forest, const double* x);

}  // namespace cdt

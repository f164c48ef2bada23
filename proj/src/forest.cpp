#include "cdt/forest.hpp"

#include <cmath>
#include <stdexcept>

#include "cdt/parallel.hpp"
#include "cdt/random.hpp"

namespace cdt {

Forest fit_forest(const double* x, std::size_t n, std::size_t p,
                  const std::vector<double>& y, const ForestParams& params,
                  std::size_t threads) {
  if (params.n_trees == 0) throw std::invalid_argument("fit_forest: n_trees == 0");
  if (n == 0) throw std::invalid_argument("fit_forest: empty training set");
  Forest forest;
  forest.n_train = n;
  forest.p = p;
  forest.trees.resize(params.n_trees);
  forest.inbag.assign(params.n_trees, std::vector<char>(n, 0));

  const std::size_t mtry =
      params.mtry > 0 ? params.mtry : (p + 2) / 3;  // ceil(p / 3)
  if (!(params.sample_fraction > 0.0) || params.sample_fraction > 1.0)
    throw std::invalid_argument("fit_forest: sample_fraction must be in (0, 1]");
  // Bagging draws n rows with replacement; a fraction below one switches to
  // subsampling ceil(fraction * n) distinct rows instead.
  std::size_t subsample = n;
  if (params.sample_fraction < 1.0) {
    subsample = static_cast<std::size_t>(
        std::ceil(params.sample_fraction * static_cast<double>(n)));
    if (subsample == 0) subsample = 1;
    if (subsample > n) subsample = n;
  }

  parallel_for(params.n_trees, threads, [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, {kTagForestTree, t}));
    std::vector<std::size_t> rows;
    if (params.sample_fraction < 1.0) {
      std::vector<std::size_t> pool(n);
      for (std::size_t i = 0; i < n; ++i) pool[i] = i;
      for (std::size_t i = 0; i < subsample; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.uniform_int(n - i));
        std::swap(pool[i], pool[j]);
      }
      pool.resize(subsample);
      rows = std::move(pool);
      for (std::size_t r : rows) forest.inbag[t][r] = 1;
    } else {
      rows.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = static_cast<std::size_t>(rng.uniform_int(n));
        rows[i] = r;
        forest.inbag[t][r] = 1;
      }
    }
    std::vector<std::size_t> grow_rows;
    std::vector<std::size_t> est_rows;
    if (params.honest && rows.size() >= 2) {
      for (std::size_t i = rows.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
        std::swap(rows[i - 1], rows[j]);
      }
      const std::size_t half = rows.size() / 2;
      grow_rows.assign(rows.begin(), rows.begin() + half);
      est_rows.assign(rows.begin() + half, rows.end());
    }

    TreeFitExtras extras;
    extras.rows = params.honest && !grow_rows.empty() ? &grow_rows : &rows;
    extras.mtry = mtry < p ? mtry : 0;
    extras.rng = &rng;
    RegressionTree tree = fit_tree(x, n, p, y, params.tree, extras);

    if (params.honest && !est_rows.empty()) {
      // Re-estimate leaf means from the held-back half; a leaf that catches
      // none of those rows keeps its grow-side mean.
      std::vector<double> sums(tree.nodes.size(), 0.0);
      std::vector<std::size_t> counts(tree.nodes.size(), 0);
      for (std::size_t r : est_rows) {
        const int leaf = tree.leaf_index(x + r * p);
        sums[static_cast<std::size_t>(leaf)] += y[r];
        ++counts[static_cast<std::size_t>(leaf)];
      }
      for (std::size_t i = 0; i < tree.nodes.size(); ++i)
        if (tree.nodes[i].is_leaf() && counts[i] > 0)
          tree.nodes[i].mean = sums[i] / static_cast<double>(counts[i]);
    }
    forest.trees[t] = std::move(tree);
  });
  return forest;
}

double predict_forest_row(const Forest& forest, const double* row) {
  double s = 0.0;
  for (const RegressionTree& tree : forest.trees) s += tree.predict_row(row);
  return s / static_cast<double>(forest.trees.size());
}

std::vector<double> predict_forest(const Forest& forest, const double* x, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict_forest_row(forest, x + i * forest.p);
  return out;
}

OobResult oob_predict(const Forest& forest, const double* x) {
  const std::size_t n = forest.n_train;
  OobResult res;
  res.pred.assign(n, 0.0);
  res.fallback.assign(n, 0);
  std::vector<std::size_t> used(n, 0);
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (forest.inbag[t][i]) continue;
      res.pred[i] += forest.trees[t].predict_row(x + i * forest.p);
      ++used[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (used[i] > 0) {
      res.pred[i] /= static_cast<double>(used[i]);
    } else {
      res.pred[i] = predict_forest_row(forest, x + i * forest.p);
      res.fallback[i] = 1;
      ++res.fallback_count;
    }
  }
  return res;
}

}  // namespace cdt

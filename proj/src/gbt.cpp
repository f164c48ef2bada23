#include "cdt/gbt.hpp"

#include <numeric>
#include <stdexcept>

#include "cdt/random.hpp"

namespace cdt {

GbtModel fit_gbt(const double* x, std::size_t n, std::size_t p,
                 const std::vector<double>& y, const GbtParams& params,
                 const std::vector<double>* weights) {
  if (n == 0) throw std::invalid_argument("fit_gbt: empty training set");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0))
    throw std::invalid_argument("fit_gbt: subsample must be in (0, 1]");

  GbtModel model;
  model.learning_rate = params.learning_rate;
  model.p = p;

  double wsum = 0.0, wysum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    wsum += w;
    wysum += w * y[i];
  }
  if (wsum <= 0.0) throw std::invalid_argument("fit_gbt: nonpositive weight total");
  model.base = wysum / wsum;

  TreeParams tree_params;
  tree_params.min_leaf = 5;
  tree_params.min_split = 10;
  tree_params.max_depth = params.max_depth;
  if (params.max_depth == 0) {
    // A depth-0 learner adds nothing beyond the base.
    return model;
  }

  std::vector<double> residual(n);
  std::vector<double> f(n, model.base);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  const std::size_t sub_n =
      params.subsample < 1.0
          ? std::max<std::size_t>(1, static_cast<std::size_t>(params.subsample *
                                                              static_cast<double>(n)))
          : n;

  model.trees.reserve(params.n_rounds);
  for (std::size_t m = 0; m < params.n_rounds; ++m) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - f[i];

    TreeFitExtras extras;
    extras.weights = weights;
    Rng rng(derive_seed(params.seed, {kTagGbtRound, m}));
    std::vector<std::size_t> sub;
    if (sub_n < n) {
      sub = rows;
      for (std::size_t i = 0; i < sub_n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
        std::swap(sub[i], sub[j]);
      }
      sub.resize(sub_n);
      extras.rows = &sub;
    }
    RegressionTree tree = fit_tree(x, n, p, residual, tree_params, extras);
    for (std::size_t i = 0; i < n; ++i)
      f[i] += params.learning_rate * tree.predict_row(x + i * p);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace cdt

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdt/rules.hpp"

namespace cdt {

class Rng;

struct TreeParams {
  std::size_t min_leaf = 7;
  std::size_t min_split = 20;       // must be >= 2 * min_leaf
  std::size_t max_depth = 30;
  double min_loss_decrease = 0.0;
  double complexity = 0.0;          // splits must cut >= this fraction of root SSE
  std::size_t max_thresholds = 0;   // per feature per node; 0 = all
};

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double decrease = 0.0;  // SSE drop; always > 0 for a returned split
};

struct TreeNode {
  int left = -1;                 // -1 on both sides = leaf
  int right = -1;
  std::size_t feature = 0;
  double threshold = 0.0;
  double decrease = 0.0;
  double mean = 0.0;             // weighted target mean of rows reaching here
  std::size_t count = 0;         // raw row count
  double weight = 0.0;           // sum of weights (== count when unweighted)
  double sse = 0.0;              // weighted SSE if this node were a leaf
  int depth = 0;

  bool is_leaf() const { return left < 0; }
};

// Nodes in preorder, root first, left subtree before right.
struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::size_t p = 0;

  bool empty() const { return nodes.empty(); }
  const TreeNode& root() const { return nodes.front(); }
  std::size_t leaf_count() const;
  std::size_t tree_depth() const;
  int leaf_index(const double* row) const;
  double predict_row(const double* row) const;
  std::vector<double> predict(const double* x, std::size_t n) const;
};

// Extra knobs used by the ensemble fitters; plain trees leave the defaults.
struct TreeFitExtras {
  const std::vector<double>* weights = nullptr;  // per-row, parallel to y
  const std::vector<std::size_t>* rows = nullptr;  // row multiset to fit on
  std::size_t mtry = 0;                          // 0 = consider all features
  Rng* rng = nullptr;  // required when mtry > 0 or max_thresholds > 0
};

// Exhaustive greedy split: thresholds are midpoints of adjacent distinct
// sorted values, both sides must keep min_leaf rows, and ties go to the
// lower feature index then the lower threshold. Empty when nothing strictly
// positive (or above min_loss_decrease, or above complexity times the SSE
// of the rows handed in) is available.
std::optional<SplitCandidate> best_split(const double* x, std::size_t n, std::size_t p,
                                         const std::vector<double>& y,
                                         const TreeParams& params,
                                         const TreeFitExtras& extras = {});

RegressionTree fit_tree(const double* x, std::size_t n, std::size_t p,
                        const std::vector<double>& y, const TreeParams& params,
                        const TreeFitExtras& extras = {});

// Everything below depth d is collapsed; the collapsed leaves keep the
// count-weighted means recorded at fit time.
RegressionTree prune_to_depth(const RegressionTree& tree, std::size_t d);

struct CcStep {
  double alpha = 0.0;
  RegressionTree tree;
};

// Weakest-link sequence from the full tree down to the root-only tree.
// Subtree cost is SSE / n_total with n_total the tree's training count.
std::vector<CcStep> cost_complexity_path(const RegressionTree& tree);

// The alpha at which each node collapses (infinity for nodes that only
// disappear with an ancestor, and for leaves). Shared by the path and the
// cross-validated pruning.
std::vector<double> collapse_alphas(const RegressionTree& tree);

RegressionTree prune_at_alpha(const RegressionTree& tree, double alpha);

struct CvPruneResult {
  RegressionTree tree;
  double chosen_alpha = 0.0;
  std::vector<double> alphas;    // candidate path alphas of the full fit
  std::vector<double> cv_error;  // mean held-out squared error per alpha
};

// K-fold cost-complexity selection: fit per fold, evaluate the path at
// geometric-mean alphas, keep the alpha with the smallest cross-validated
// error, ties resolved toward the larger alpha (the smaller tree).
CvPruneResult cv_prune(const double* x, std::size_t n, std::size_t p,
                       const std::vector<double>& y, const TreeParams& params,
                       std::size_t folds, std::uint64_t seed);

// Leaves left to right; rule paths are canonicalized per feature.
Partition partition_from_tree(const RegressionTree& tree);

// Leaf order matches partition_from_tree: for each row the position of its
// leaf in that left-to-right order.
std::vector<std::size_t> leaf_memberships(const RegressionTree& tree, const double* x,
                                          std::size_t n);

// Indented one-node-per-line sketch with means and counts.
std::string render_tree(const RegressionTree& tree, const std::vector<std::string>& columns);

}  // namespace cdt

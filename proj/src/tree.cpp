#include "cdt/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cdt/errors.hpp"
#include "cdt/random.hpp"

namespace cdt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct NodeStats {
  double w = 0.0;   // weight sum
  double s = 0.0;   // weighted target sum
  double ss = 0.0;  // weighted target square sum
  std::size_t count = 0;
};

NodeStats accumulate(const std::vector<double>& y, const std::vector<double>* weights,
                     const std::vector<std::size_t>& rows) {
  NodeStats st;
  for (std::size_t r : rows) {
    const double w = weights ? (*weights)[r] : 1.0;
    st.w += w;
    st.s += w * y[r];
    st.ss += w * y[r] * y[r];
    ++st.count;
  }
  return st;
}

void check_params(const TreeParams& params) {
  if (params.min_leaf == 0) throw std::invalid_argument("min_leaf must be positive");
  if (params.min_split < 2 * params.min_leaf)
    throw std::invalid_argument("min_split must be at least twice min_leaf");
  if (!(params.complexity >= 0.0) || !std::isfinite(params.complexity))
    throw std::invalid_argument("complexity must be a finite nonnegative fraction");
}

double node_sse(const NodeStats& st) {
  return std::max(0.0, st.ss - (st.w > 0.0 ? st.s * st.s / st.w : 0.0));
}

// The relative floor is anchored to the SSE of the full row set handed to the
// fit, so fold refits inside cross-validation rescale it to their own data.
TreeParams with_absolute_floor(const TreeParams& params, double root_sse) {
  TreeParams local = params;
  if (params.complexity > 0.0)
    local.min_loss_decrease =
        std::max(params.min_loss_decrease, params.complexity * root_sse);
  return local;
}

// Greedy search over the given features and row set. Candidates are the
// midpoints between adjacent distinct values with at least min_leaf raw rows
// on each side; the winner maximizes the drop in weighted SSE with ties
// going to the lower feature then the lower threshold.
std::optional<SplitCandidate> best_split_rows(const double* x, std::size_t p,
                                              const std::vector<double>& y,
                                              const std::vector<double>* weights,
                                              const std::vector<std::size_t>& rows,
                                              const std::vector<std::size_t>& features,
                                              const TreeParams& params, Rng* rng) {
  const NodeStats total = accumulate(y, weights, rows);
  if (total.count < 2 * params.min_leaf || total.w <= 0.0) return std::nullopt;
  const double base = total.s * total.s / total.w;

  std::optional<SplitCandidate> best;
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(rows.size());
  std::vector<std::size_t> boundaries;

  for (std::size_t f : features) {
    order.clear();
    for (std::size_t r : rows) order.emplace_back(x[r * p + f], r);
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Positions i such that value[i] < value[i+1] and the min_leaf counts
    // hold on both sides.
    boundaries.clear();
    const std::size_t n = order.size();
    for (std::size_t i = params.min_leaf - 1; i + params.min_leaf < n; ++i)
      if (order[i].first < order[i + 1].first) boundaries.push_back(i);
    if (boundaries.empty()) continue;

    if (params.max_thresholds > 0 && boundaries.size() > params.max_thresholds) {
      if (!rng)
        throw std::invalid_argument("max_thresholds needs a seeded generator");
      // Partial Fisher-Yates, then restore ascending order.
      for (std::size_t i = 0; i < params.max_thresholds; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng->uniform_int(boundaries.size() - i));
        std::swap(boundaries[i], boundaries[j]);
      }
      boundaries.resize(params.max_thresholds);
      std::sort(boundaries.begin(), boundaries.end());
    }

    double wl = 0.0, sl = 0.0;
    std::size_t bpos = 0;
    for (std::size_t i = 0; i < n && bpos < boundaries.size(); ++i) {
      const double w = weights ? (*weights)[order[i].second] : 1.0;
      wl += w;
      sl += w * y[order[i].second];
      if (i != boundaries[bpos]) continue;
      ++bpos;
      const double wr = total.w - wl;
      const double sr = total.s - sl;
      if (wl <= 0.0 || wr <= 0.0) continue;
      const double decrease = sl * sl / wl + sr * sr / wr - base;
      if (decrease <= 0.0 || decrease < params.min_loss_decrease) continue;
      const double threshold = 0.5 * (order[i].first + order[i + 1].first);
      if (!best || decrease > best->decrease ||
          (decrease == best->decrease &&
           (f < best->feature || (f == best->feature && threshold < best->threshold)))) {
        best = SplitCandidate{f, threshold, decrease};
      }
    }
  }
  return best;
}

std::vector<std::size_t> all_features(std::size_t p) {
  std::vector<std::size_t> f(p);
  std::iota(f.begin(), f.end(), 0);
  return f;
}

}  // namespace

std::optional<SplitCandidate> best_split(const double* x, std::size_t n, std::size_t p,
                                         const std::vector<double>& y,
                                         const TreeParams& params,
                                         const TreeFitExtras& extras) {
  check_params(params);
  std::vector<std::size_t> rows;
  if (extras.rows) {
    rows = *extras.rows;
  } else {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0);
  }
  const TreeParams local =
      with_absolute_floor(params, node_sse(accumulate(y, extras.weights, rows)));
  return best_split_rows(x, p, y, extras.weights, rows, all_features(p), local,
                         extras.rng);
}

RegressionTree fit_tree(const double* x, std::size_t n, std::size_t p,
                        const std::vector<double>& y, const TreeParams& params,
                        const TreeFitExtras& extras) {
  check_params(params);
  if ((extras.mtry > 0 && extras.mtry < p) && !extras.rng)
    throw std::invalid_argument("mtry needs a seeded generator");

  RegressionTree tree;
  tree.p = p;
  std::vector<std::size_t> rows;
  if (extras.rows) {
    rows = *extras.rows;
  } else {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0);
  }
  if (rows.empty()) throw std::invalid_argument("fit_tree: no rows");

  const TreeParams local =
      with_absolute_floor(params, node_sse(accumulate(y, extras.weights, rows)));
  const std::vector<std::size_t> full = all_features(p);
  std::vector<std::size_t> sampled;

  // Preorder build, left subtree first; node ids are stable for a given
  // seed which keeps downstream leaf ordering reproducible.
  auto build = [&](auto&& self, std::vector<std::size_t> node_rows, int depth) -> int {
    const NodeStats st = accumulate(y, extras.weights, node_rows);
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    {
      TreeNode& nd = tree.nodes[id];
      nd.depth = depth;
      nd.count = st.count;
      nd.weight = st.w;
      nd.mean = st.w > 0.0 ? st.s / st.w : 0.0;
      nd.sse = node_sse(st);
    }
    if (st.count < local.min_split ||
        static_cast<std::size_t>(depth) >= local.max_depth)
      return id;

    const std::vector<std::size_t>* feats = &full;
    if (extras.mtry > 0 && extras.mtry < p) {
      sampled = full;
      for (std::size_t i = 0; i < extras.mtry; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(extras.rng->uniform_int(p - i));
        std::swap(sampled[i], sampled[j]);
      }
      sampled.resize(extras.mtry);
      std::sort(sampled.begin(), sampled.end());
      feats = &sampled;
    }
    const auto split = best_split_rows(x, p, y, extras.weights, node_rows, *feats,
                                       local, extras.rng);
    if (!split) return id;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : node_rows) {
      if (x[r * p + split->feature] <= split->threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    node_rows.clear();
    node_rows.shrink_to_fit();

    const int l = self(self, std::move(left_rows), depth + 1);
    const int r = self(self, std::move(right_rows), depth + 1);
    TreeNode& nd = tree.nodes[id];
    nd.feature = split->feature;
    nd.threshold = split->threshold;
    nd.decrease = split->decrease;
    nd.left = l;
    nd.right = r;
    return id;
  };
  build(build, std::move(rows), 0);
  return tree;
}

std::size_t RegressionTree::leaf_count() const {
  std::size_t c = 0;
  for (const TreeNode& nd : nodes)
    if (nd.is_leaf()) ++c;
  return c;
}

std::size_t RegressionTree::tree_depth() const {
  int d = 0;
  for (const TreeNode& nd : nodes) d = std::max(d, nd.depth);
  return static_cast<std::size_t>(d);
}

int RegressionTree::leaf_index(const double* row) const {
  int cur = 0;
  while (!nodes[cur].is_leaf()) {
    const TreeNode& nd = nodes[cur];
    cur = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return cur;
}

double RegressionTree::predict_row(const double* row) const {
  return nodes[leaf_index(row)].mean;
}

std::vector<double> RegressionTree::predict(const double* x, std::size_t n) const {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict_row(x + i * p);
  return out;
}

namespace {

// Copies the subtree rooted at src into out, stopping at nodes flagged as
// collapsed, and renumbers children.
int copy_pruned(const RegressionTree& tree, int src, const std::vector<char>& collapse,
                RegressionTree& out) {
  const int id = static_cast<int>(out.nodes.size());
  out.nodes.push_back(tree.nodes[src]);
  if (tree.nodes[src].is_leaf() || collapse[src]) {
    TreeNode& nd = out.nodes[id];
    nd.left = nd.right = -1;
    nd.feature = 0;
    nd.threshold = 0.0;
    nd.decrease = 0.0;
    return id;
  }
  const int l = copy_pruned(tree, tree.nodes[src].left, collapse, out);
  const int r = copy_pruned(tree, tree.nodes[src].right, collapse, out);
  out.nodes[id].left = l;
  out.nodes[id].right = r;
  return id;
}

}  // namespace

RegressionTree prune_to_depth(const RegressionTree& tree, std::size_t d) {
  std::vector<char> collapse(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (static_cast<std::size_t>(tree.nodes[i].depth) >= d) collapse[i] = 1;
  RegressionTree out;
  out.p = tree.p;
  copy_pruned(tree, 0, collapse, out);
  return out;
}

std::vector<double> collapse_alphas(const RegressionTree& tree) {
  const std::size_t m = tree.nodes.size();
  std::vector<double> alpha(m, kInf);
  if (m == 0 || tree.nodes[0].is_leaf()) return alpha;
  const double n_total = tree.nodes[0].weight;

  // alive[i]: node i is still an internal node of the partially collapsed
  // tree. Leaves stay at infinity.
  std::vector<char> alive(m, 0);
  for (std::size_t i = 0; i < m; ++i)
    if (!tree.nodes[i].is_leaf()) alive[i] = 1;

  std::vector<double> sub_sse(m, 0.0);
  std::vector<std::size_t> sub_leaves(m, 0);
  double last = 0.0;
  while (alive[0]) {
    // Postorder pass over the current structure (ids are preorder, so a
    // reverse sweep sees children before parents).
    for (std::size_t ii = m; ii-- > 0;) {
      const TreeNode& nd = tree.nodes[ii];
      if (nd.is_leaf() || !alive[ii]) {
        sub_sse[ii] = nd.sse;
        sub_leaves[ii] = 1;
      } else {
        sub_sse[ii] = sub_sse[nd.left] + sub_sse[nd.right];
        sub_leaves[ii] = sub_leaves[nd.left] + sub_leaves[nd.right];
      }
    }
    double gmin = kInf;
    for (std::size_t i = 0; i < m; ++i) {
      if (!alive[i]) continue;
      const double g = (tree.nodes[i].sse - sub_sse[i]) /
                       static_cast<double>(sub_leaves[i] - 1) / n_total;
      gmin = std::min(gmin, g);
    }
    gmin = std::max(gmin, last);  // absorb float dust; theory says monotone
    for (std::size_t i = 0; i < m; ++i) {
      if (!alive[i]) continue;
      const double g = (tree.nodes[i].sse - sub_sse[i]) /
                       static_cast<double>(sub_leaves[i] - 1) / n_total;
      if (g <= gmin) {
        // The node and every live internal node under it vanish here.
        alpha[i] = gmin;
        alive[i] = 0;
      }
    }
    // Sweep descendants of collapsed nodes (preorder: parents first).
    for (std::size_t i = 0; i < m; ++i) {
      const TreeNode& nd = tree.nodes[i];
      if (nd.is_leaf() || alive[i]) continue;
      for (int c : {nd.left, nd.right})
        if (alive[c]) {
          alpha[c] = alpha[i];
          alive[c] = 0;
        }
    }
    last = gmin;
  }
  return alpha;
}

RegressionTree prune_at_alpha(const RegressionTree& tree, double alpha) {
  const std::vector<double> ca = collapse_alphas(tree);
  std::vector<char> collapse(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (ca[i] <= alpha) collapse[i] = 1;
  RegressionTree out;
  out.p = tree.p;
  copy_pruned(tree, 0, collapse, out);
  return out;
}

std::vector<CcStep> cost_complexity_path(const RegressionTree& tree) {
  std::vector<CcStep> path;
  path.push_back({0.0, tree});
  const std::vector<double> ca = collapse_alphas(tree);
  std::vector<double> steps;
  for (double a : ca)
    if (a < kInf) steps.push_back(a);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  for (double a : steps) path.push_back({a, prune_at_alpha(tree, a)});
  return path;
}

namespace {

// Prediction under "collapse every node with alpha <= cut" without
// materializing the pruned tree.
double predict_collapsed(const RegressionTree& tree, const std::vector<double>& ca,
                         double cut, const double* row) {
  int cur = 0;
  while (!tree.nodes[cur].is_leaf() && ca[cur] > cut) {
    const TreeNode& nd = tree.nodes[cur];
    cur = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return tree.nodes[cur].mean;
}

}  // namespace

CvPruneResult cv_prune(const double* x, std::size_t n, std::size_t p,
                       const std::vector<double>& y, const TreeParams& params,
                       std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cv_prune: need at least 2 folds");
  if (n < folds) throw std::invalid_argument("cv_prune: need n >= folds");

  CvPruneResult out;
  Rng full_rng(derive_seed(seed, {kTagThresholdSample, 0}));
  TreeFitExtras full_extras;
  if (params.max_thresholds > 0) full_extras.rng = &full_rng;
  RegressionTree full = fit_tree(x, n, p, y, params, full_extras);
  const std::vector<double> ca = collapse_alphas(full);
  out.alphas.push_back(0.0);
  {
    std::vector<double> steps;
    for (double a : ca)
      if (a < kInf) steps.push_back(a);
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    out.alphas.insert(out.alphas.end(), steps.begin(), steps.end());
  }
  const std::size_t m = out.alphas.size();
  if (m == 1) {
    out.tree = std::move(full);
    out.chosen_alpha = 0.0;
    out.cv_error.assign(1, 0.0);
    return out;
  }

  // Evaluation points: geometric means of adjacent path alphas, infinity
  // for the root-only end of the path.
  std::vector<double> eval(m);
  for (std::size_t k = 0; k + 1 < m; ++k)
    eval[k] = std::sqrt(out.alphas[k] * out.alphas[k + 1]);
  eval[m - 1] = kInf;

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, {kTagCvFolds}));
  rng.shuffle(perm);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % folds;

  std::vector<double> sse(m, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < n; ++i)
      (fold_of[i] == f ? test_rows : train_rows).push_back(i);
    if (train_rows.empty() || test_rows.empty()) continue;
    TreeFitExtras extras;
    extras.rows = &train_rows;
    Rng fold_rng(derive_seed(seed, {kTagThresholdSample, f + 1}));
    if (params.max_thresholds > 0) extras.rng = &fold_rng;
    RegressionTree tf = fit_tree(x, n, p, y, params, extras);
    const std::vector<double> caf = collapse_alphas(tf);
    for (std::size_t i : test_rows) {
      const double* row = x + i * p;
      for (std::size_t k = 0; k < m; ++k) {
        const double pred = predict_collapsed(tf, caf, eval[k], row);
        sse[k] += (y[i] - pred) * (y[i] - pred);
      }
    }
  }
  out.cv_error.resize(m);
  for (std::size_t k = 0; k < m; ++k) out.cv_error[k] = sse[k] / static_cast<double>(n);

  // Smallest error wins; on an exact tie the larger alpha (smaller tree).
  std::size_t pick = 0;
  for (std::size_t k = 1; k < m; ++k)
    if (out.cv_error[k] <= out.cv_error[pick]) pick = k;
  out.chosen_alpha = out.alphas[pick];
  out.tree = prune_at_alpha(full, out.chosen_alpha);
  return out;
}

namespace {

void collect_leaves(const RegressionTree& tree, int id, std::vector<Rule>& path,
                    Partition& part, std::vector<int>& leaf_ids) {
  const TreeNode& nd = tree.nodes[id];
  if (nd.is_leaf()) {
    part.groups.push_back(canonical_subgroup(path));
    leaf_ids.push_back(id);
    return;
  }
  path.push_back({nd.feature, RuleOp::LE, nd.threshold});
  collect_leaves(tree, nd.left, path, part, leaf_ids);
  path.back() = {nd.feature, RuleOp::GT, nd.threshold};
  collect_leaves(tree, nd.right, path, part, leaf_ids);
  path.pop_back();
}

}  // namespace

Partition partition_from_tree(const RegressionTree& tree) {
  Partition part;
  part.p = tree.p;
  std::vector<Rule> path;
  std::vector<int> leaf_ids;
  collect_leaves(tree, 0, path, part, leaf_ids);
  return part;
}

std::vector<std::size_t> leaf_memberships(const RegressionTree& tree, const double* x,
                                          std::size_t n) {
  Partition part;
  part.p = tree.p;
  std::vector<Rule> path;
  std::vector<int> leaf_ids;
  collect_leaves(tree, 0, path, part, leaf_ids);
  std::vector<std::size_t> group_of(tree.nodes.size(), 0);
  for (std::size_t g = 0; g < leaf_ids.size(); ++g) group_of[leaf_ids[g]] = g;
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = group_of[static_cast<std::size_t>(tree.leaf_index(x + i * tree.p))];
  return out;
}

namespace {

void render_node(const RegressionTree& tree, int id, const std::vector<std::string>& columns,
                 int indent, const std::string& cond, std::string& out) {
  const TreeNode& nd = tree.nodes[id];
  out.append(static_cast<std::size_t>(indent) * 2, ' ');
  if (!cond.empty()) {
    out += cond;
    out += ": ";
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "n=%zu mean=%.6g%s", nd.count, nd.mean,
                nd.is_leaf() ? " *" : "");
  out += buf;
  out += '\n';
  if (nd.is_leaf()) return;
  char thr[48];
  std::snprintf(thr, sizeof(thr), "%.6g", nd.threshold);
  render_node(tree, nd.left, columns, indent + 1,
              columns.at(nd.feature) + " <= " + thr, out);
  render_node(tree, nd.right, columns, indent + 1,
              columns.at(nd.feature) + " > " + thr, out);
}

}  // namespace

std::string render_tree(const RegressionTree& tree, const std::vector<std::string>& columns) {
  std::string out;
  render_node(tree, 0, columns, 0, "", out);
  return out;
}

}  // namespace cdt

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cdt/random.hpp"
#include "cdt/tree.hpp"

using namespace cdt;

namespace {

// Independent exhaustive search used as the oracle: every midpoint between
// distinct values of every feature, SSE computed by direct two-pass sums.
struct BruteSplit {
  std::size_t feature;
  double threshold;
  double decrease;
};

double direct_sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double t : v) m += t;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double t : v) s += (t - m) * (t - m);
  return s;
}

std::optional<BruteSplit> brute_split(const std::vector<double>& x, std::size_t n,
                                      std::size_t p, const std::vector<double>& y,
                                      std::size_t min_leaf) {
  const double sse_all = direct_sse(y);
  std::optional<BruteSplit> best;
  for (std::size_t f = 0; f < p; ++f) {
    std::vector<double> uniq;
    for (std::size_t i = 0; i < n; ++i) uniq.push_back(x[i * p + f]);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (std::size_t k = 0; k + 1 < uniq.size(); ++k) {
      const double thr = 0.5 * (uniq[k] + uniq[k + 1]);
      std::vector<double> yl, yr;
      for (std::size_t i = 0; i < n; ++i)
        (x[i * p + f] <= thr ? yl : yr).push_back(y[i]);
      if (yl.size() < min_leaf || yr.size() < min_leaf) continue;
      const double dec = sse_all - direct_sse(yl) - direct_sse(yr);
      if (dec <= 0.0) continue;
      if (!best || dec > best->decrease) best = BruteSplit{f, thr, dec};
    }
  }
  return best;
}

std::vector<double> random_matrix(Rng& rng, std::size_t n, std::size_t p, bool round1) {
  std::vector<double> x(n * p);
  for (double& v : x) {
    v = rng.normal();
    if (round1) v = std::round(v * 10.0) / 10.0;
  }
  return x;
}

}  // namespace

TEST_CASE("best split equals exhaustive search on random tables") {
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  for (int rep = 0; rep < 200; ++rep) {
    Rng rng(derive_seed(1234, {static_cast<std::uint64_t>(rep)}));
    const std::size_t n = 40 + rng.uniform_int(160);
    const std::size_t p = 1 + rng.uniform_int(6);
    params.min_leaf = 1 + rng.uniform_int(5);
    params.min_split = 2 * params.min_leaf;
    const bool round1 = rep % 3 == 0;  // duplicated values every third table
    const std::vector<double> x = random_matrix(rng, n, p, round1);
    std::vector<double> y(n);
    for (double& v : y) v = rng.normal();

    const auto got = best_split(x.data(), n, p, y, params);
    const auto want = brute_split(x, n, p, y, params.min_leaf);
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    CHECK(got->feature == want->feature);
    CHECK(got->threshold == want->threshold);
    CHECK(got->decrease == doctest::Approx(want->decrease).epsilon(1e-9));
  }
}

TEST_CASE("best split on the four-point table") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y = {0.0, 0.0, 1.0, 1.0};
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  const auto s = best_split(x.data(), 4, 1, y, params);
  REQUIRE(s.has_value());
  CHECK(s->feature == 0);
  CHECK(s->threshold == 2.5);
  CHECK(s->decrease == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("best split degenerate inputs") {
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;

  // Constant target: nothing to gain.
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  CHECK_FALSE(best_split(x.data(), 4, 1, {2.0, 2.0, 2.0, 2.0}, params).has_value());

  // Constant feature: nowhere to cut.
  const std::vector<double> xc = {1.0, 1.0, 1.0, 1.0};
  CHECK_FALSE(best_split(xc.data(), 4, 1, {0.0, 1.0, 2.0, 3.0}, params).has_value());

  // Too few rows for two leaves.
  params.min_leaf = 3;
  params.min_split = 6;
  CHECK_FALSE(best_split(x.data(), 4, 1, {0.0, 1.0, 2.0, 3.0}, params).has_value());

  // n == 2*min_leaf with distinct values: only the middle cut is admissible.
  params.min_leaf = 2;
  params.min_split = 4;
  const auto s = best_split(x.data(), 4, 1, {0.0, 1.0, 4.0, 5.0}, params);
  REQUIRE(s.has_value());
  CHECK(s->threshold == 2.5);

  // min_loss_decrease above the attainable drop blocks the split.
  params.min_leaf = 1;
  params.min_split = 2;
  params.min_loss_decrease = 2.0;
  CHECK_FALSE(best_split(x.data(), 4, 1, {0.0, 0.0, 1.0, 1.0}, params).has_value());
}

TEST_CASE("fit recovers a clean step function as a single split") {
  Rng rng(99);
  const std::size_t n = 400, p = 2;
  std::vector<double> x(n * p);
  for (double& v : x) v = rng.uniform();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i * p] > 0.3 ? 1.0 : 0.0;

  const RegressionTree tree = fit_tree(x.data(), n, p, y, TreeParams{});
  CHECK(tree.tree_depth() == 1);
  CHECK(tree.leaf_count() == 2);
  CHECK(tree.root().feature == 0);
  CHECK(std::fabs(tree.root().threshold - 0.3) < 0.05);
  const auto pred = tree.predict(x.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(pred[i] == y[i]);
}

TEST_CASE("max depth zero gives the global mean") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  params.max_depth = 0;
  const RegressionTree tree = fit_tree(x.data(), 4, 1, {0.0, 0.0, 1.0, 1.0}, params);
  CHECK(tree.nodes.size() == 1);
  const double q = 9.9;
  CHECK(tree.predict_row(&q) == doctest::Approx(0.5));
}

TEST_CASE("value at the threshold routes left") {
  const std::vector<double> x = {0.0, 1.0, 0.0, 1.0};
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  const RegressionTree tree = fit_tree(x.data(), 4, 1, {0.0, 1.0, 0.0, 1.0}, params);
  REQUIRE(tree.leaf_count() == 2);
  CHECK(tree.root().threshold == 0.5);
  const double at = 0.5;
  CHECK(tree.predict_row(&at) == 0.0);
}

TEST_CASE("fitting is deterministic") {
  Rng rng(5);
  const std::size_t n = 300, p = 4;
  const std::vector<double> x = random_matrix(rng, n, p, false);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i * p + 1] + 0.3 * rng.normal();

  const RegressionTree a = fit_tree(x.data(), n, p, y, TreeParams{});
  const RegressionTree b = fit_tree(x.data(), n, p, y, TreeParams{});
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].feature == b.nodes[i].feature);
    CHECK(a.nodes[i].threshold == b.nodes[i].threshold);
    CHECK(a.nodes[i].mean == b.nodes[i].mean);
  }
}

TEST_CASE("weighted split equals the replicated-rows split") {
  Rng rng(11);
  const std::size_t n = 30, p = 2;
  const std::vector<double> x = random_matrix(rng, n, p, false);
  std::vector<double> y(n), w(n);
  std::vector<double> xr, yr;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.normal();
    const std::size_t k = 1 + rng.uniform_int(3);
    w[i] = static_cast<double>(k);
    for (std::size_t c = 0; c < k; ++c) {
      xr.insert(xr.end(), x.begin() + i * p, x.begin() + (i + 1) * p);
      yr.push_back(y[i]);
    }
  }
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  TreeFitExtras extras;
  extras.weights = &w;
  const auto sw = best_split(x.data(), n, p, y, params, extras);
  const auto sr = best_split(xr.data(), yr.size(), p, yr, params);
  REQUIRE(sw.has_value());
  REQUIRE(sr.has_value());
  CHECK(sw->feature == sr->feature);
  CHECK(sw->threshold == sr->threshold);
  CHECK(sw->decrease == doctest::Approx(sr->decrease).epsilon(1e-9));

  // Depth-capped trees induce the same training-row partition, so training
  // predictions must agree. (Probe points away from the data can differ:
  // two splits isolating the same rows tie exactly and either is valid.)
  params.max_depth = 2;
  RegressionTree tw = fit_tree(x.data(), n, p, y, params, extras);
  RegressionTree tr = fit_tree(xr.data(), yr.size(), p, yr, params);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(tw.predict_row(x.data() + i * p) ==
          doctest::Approx(tr.predict_row(x.data() + i * p)).epsilon(1e-9));
}

TEST_CASE("feature subsampling uses only sampled features and is seeded") {
  Rng data_rng(21);
  const std::size_t n = 200, p = 6;
  const std::vector<double> x = random_matrix(data_rng, n, p, false);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i * p] + 0.5 * data_rng.normal();

  auto fit_with_seed = [&](std::uint64_t seed) {
    Rng rng(seed);
    TreeFitExtras extras;
    extras.mtry = 2;
    extras.rng = &rng;
    return fit_tree(x.data(), n, p, y, TreeParams{}, extras);
  };
  const RegressionTree a = fit_with_seed(3), b = fit_with_seed(3);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i)
    CHECK(a.nodes[i].threshold == b.nodes[i].threshold);

  bool any_differs = false;
  for (std::uint64_t s = 10; s < 15 && !any_differs; ++s) {
    const RegressionTree c = fit_with_seed(s);
    if (c.nodes.size() != a.nodes.size()) {
      any_differs = true;
      break;
    }
    for (std::size_t i = 0; i < a.nodes.size(); ++i)
      if (c.nodes[i].threshold != a.nodes[i].threshold) any_differs = true;
  }
  CHECK(any_differs);

  CHECK_THROWS(fit_tree(x.data(), n, p, y, TreeParams{},
                        TreeFitExtras{nullptr, nullptr, 2, nullptr}));
}

TEST_CASE("threshold subsampling stays within the candidate set") {
  Rng data_rng(31);
  const std::size_t n = 300;
  std::vector<double> x(n);
  for (double& v : x) v = data_rng.normal();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.2 ? 1.0 : 0.0;

  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  params.max_thresholds = 5;
  CHECK_THROWS(best_split(x.data(), n, 1, y, params));

  Rng rng(7);
  TreeFitExtras extras;
  extras.rng = &rng;
  const auto s = best_split(x.data(), n, 1, y, params, extras);
  REQUIRE(s.has_value());
  // The returned threshold must be a midpoint of adjacent sorted values.
  std::vector<double> sorted(x);
  std::sort(sorted.begin(), sorted.end());
  bool is_midpoint = false;
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (s->threshold == 0.5 * (sorted[i] + sorted[i + 1])) is_midpoint = true;
  CHECK(is_midpoint);
}

TEST_CASE("prune to depth collapses with count-weighted means") {
  Rng rng(42);
  const std::size_t n = 500, p = 3;
  const std::vector<double> x = random_matrix(rng, n, p, false);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = x[i * p] + 0.7 * x[i * p + 1] + 0.2 * rng.normal();

  const RegressionTree full = fit_tree(x.data(), n, p, y, TreeParams{});
  REQUIRE(full.tree_depth() >= 3);
  const RegressionTree cut = prune_to_depth(full, 2);
  CHECK(cut.tree_depth() <= 2);
  CHECK(cut.leaf_count() <= 4);

  // Oracle: re-route every training row through the pruned tree and compare
  // recomputed leaf means and counts against the stored values.
  std::vector<double> sum(cut.nodes.size(), 0.0);
  std::vector<std::size_t> cnt(cut.nodes.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int leaf = cut.leaf_index(x.data() + i * p);
    sum[leaf] += y[i];
    ++cnt[leaf];
  }
  for (std::size_t k = 0; k < cut.nodes.size(); ++k) {
    if (!cut.nodes[k].is_leaf()) continue;
    REQUIRE(cnt[k] == cut.nodes[k].count);
    CHECK(cut.nodes[k].mean ==
          doctest::Approx(sum[k] / static_cast<double>(cnt[k])).epsilon(1e-10));
  }

  const RegressionTree stump = prune_to_depth(full, 0);
  CHECK(stump.nodes.size() == 1);
  CHECK(stump.root().mean == doctest::Approx(full.root().mean));
}

TEST_CASE("cost complexity path on a single-split tree") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y = {0.0, 0.0, 1.0, 1.0};
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  const RegressionTree tree = fit_tree(x.data(), 4, 1, y, params);
  REQUIRE(tree.leaf_count() == 2);
  const auto path = cost_complexity_path(tree);
  REQUIRE(path.size() == 2);
  CHECK(path[0].alpha == 0.0);
  CHECK(path[0].tree.leaf_count() == 2);
  CHECK(path[1].alpha == doctest::Approx(1.0 / 4.0).epsilon(1e-12));
  CHECK(path[1].tree.leaf_count() == 1);
}

TEST_CASE("cost complexity path of a leaf is itself") {
  const std::vector<double> x = {1.0, 2.0, 3.0};
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  const RegressionTree tree = fit_tree(x.data(), 3, 1, {5.0, 5.0, 5.0}, params);
  REQUIRE(tree.nodes.size() == 1);
  const auto path = cost_complexity_path(tree);
  REQUIRE(path.size() == 1);
  CHECK(path[0].alpha == 0.0);
  CHECK(path[0].tree.nodes.size() == 1);
}

TEST_CASE("cost complexity path is nested down to the root") {
  Rng rng(17);
  const std::size_t n = 300, p = 3;
  const std::vector<double> x = random_matrix(rng, n, p, false);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i * p] + rng.normal();

  const RegressionTree full = fit_tree(x.data(), n, p, y, TreeParams{});
  const auto path = cost_complexity_path(full);
  REQUIRE(path.size() >= 2);
  CHECK(path.front().tree.leaf_count() == full.leaf_count());
  CHECK(path.back().tree.leaf_count() == 1);
  for (std::size_t k = 1; k < path.size(); ++k) {
    CHECK(path[k].alpha > path[k - 1].alpha);
    CHECK(path[k].tree.leaf_count() < path[k - 1].tree.leaf_count());
  }
}

TEST_CASE("cross-validated pruning keeps real structure") {
  Rng rng(8);
  const std::size_t n = 500, p = 3;
  const std::vector<double> x = random_matrix(rng, n, p, false);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = (x[i * p] > 0.0 ? 1.0 : 0.0) + 0.1 * rng.normal();

  const CvPruneResult res = cv_prune(x.data(), n, p, y, TreeParams{}, 10, 2024);
  CHECK(res.tree.leaf_count() >= 2);
  CHECK(res.tree.root().feature == 0);
  CHECK(std::fabs(res.tree.root().threshold) < 0.1);
  CHECK(res.alphas.size() == res.cv_error.size());

  const CvPruneResult res2 = cv_prune(x.data(), n, p, y, TreeParams{}, 10, 2024);
  CHECK(res2.chosen_alpha == res.chosen_alpha);
  CHECK(res2.tree.nodes.size() == res.tree.nodes.size());
}

TEST_CASE("cross-validated pruning collapses pure noise") {
  int root_only = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Rng rng(derive_seed(555, {static_cast<std::uint64_t>(rep)}));
    const std::size_t n = 500, p = 5;
    const std::vector<double> x = random_matrix(rng, n, p, false);
    std::vector<double> y(n);
    for (double& v : y) v = rng.normal();
    const CvPruneResult res =
        cv_prune(x.data(), n, p, y, TreeParams{}, 10, derive_seed(777, {static_cast<std::uint64_t>(rep)}));
    if (res.tree.leaf_count() == 1) ++root_only;
  }
  CHECK(root_only >= 90);
}

namespace {

// Two nested steps: a dominant one on x0 and a faint one on x1 whose SSE
// decrease is about half a percent of the root SSE.
struct NestedSteps {
  std::vector<double> x, y;
  std::size_t n = 40, p = 2;
};

NestedSteps make_nested() {
  NestedSteps d;
  for (std::size_t i = 0; i < d.n; ++i) {
    const double x0 = i < 20 ? -1.0 : 1.0;
    const double x1 = (i % 20) < 10 ? -1.0 : 1.0;
    d.x.push_back(x0);
    d.x.push_back(x1);
    d.y.push_back(10.0 * (x0 > 0.0) + 1.0 * (x1 > 0.0));
  }
  return d;
}

}  // namespace

TEST_CASE("complexity floor drops splits below its share of the root error") {
  const NestedSteps d = make_nested();
  TreeParams params;

  params.complexity = 0.0;
  const RegressionTree full = fit_tree(d.x.data(), d.n, d.p, d.y, params);
  CHECK(full.leaf_count() == 4);

  // x1 recovers 10 of the 1010 root SSE, under one percent.
  params.complexity = 0.01;
  const RegressionTree floored = fit_tree(d.x.data(), d.n, d.p, d.y, params);
  CHECK(floored.leaf_count() == 2);

  params.complexity = 0.004;
  const RegressionTree loose = fit_tree(d.x.data(), d.n, d.p, d.y, params);
  CHECK(loose.leaf_count() == 4);
}

TEST_CASE("complexity floor equals the explicit absolute floor") {
  const NestedSteps d = make_nested();

  double mean = 0.0;
  for (double v : d.y) mean += v;
  mean /= static_cast<double>(d.n);
  double root_sse = 0.0;
  for (double v : d.y) root_sse += (v - mean) * (v - mean);

  TreeParams rel;
  rel.complexity = 0.01;
  TreeParams abs;
  abs.min_loss_decrease = 0.01 * root_sse;
  const RegressionTree a = fit_tree(d.x.data(), d.n, d.p, d.y, rel);
  const RegressionTree b = fit_tree(d.x.data(), d.n, d.p, d.y, abs);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].feature == b.nodes[i].feature);
    CHECK(a.nodes[i].threshold == b.nodes[i].threshold);
    CHECK(a.nodes[i].mean == b.nodes[i].mean);
  }
}

TEST_CASE("complexity must be a finite nonnegative fraction") {
  const NestedSteps d = make_nested();
  TreeParams params;
  params.complexity = -0.1;
  CHECK_THROWS_AS(fit_tree(d.x.data(), d.n, d.p, d.y, params), std::invalid_argument);
  params.complexity = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_tree(d.x.data(), d.n, d.p, d.y, params), std::invalid_argument);
}

TEST_CASE("partition and memberships agree") {
  Rng rng(23);
  const std::size_t n = 400, p = 3;
  const std::vector<double> x = random_matrix(rng, n, p, false);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = x[i * p] - x[i * p + 2] + 0.3 * rng.normal();

  const RegressionTree tree = fit_tree(x.data(), n, p, y, TreeParams{});
  const Partition part = partition_from_tree(tree);
  CHECK(part.groups.size() == tree.leaf_count());
  const auto via_rules = assign(part, x.data(), n, p);
  const auto via_tree = leaf_memberships(tree, x.data(), n);
  CHECK(via_rules == via_tree);
}

TEST_CASE("tree rendering mentions nodes and columns") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  TreeParams params;
  params.min_leaf = 1;
  params.min_split = 2;
  const RegressionTree tree = fit_tree(x.data(), 4, 1, {0.0, 0.0, 1.0, 1.0}, params);
  const std::string text = render_tree(tree, {"dose"});
  CHECK(text.find("dose <= 2.5") != std::string::npos);
  CHECK(text.find("dose > 2.5") != std::string::npos);
  CHECK(text.find("n=4") != std::string::npos);
}

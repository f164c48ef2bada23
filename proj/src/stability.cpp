#include "cdt/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cdt/errors.hpp"
#include "cdt/parallel.hpp"
#include "cdt/random.hpp"
#include "cdt/stats.hpp"

namespace cdt {

std::vector<char> coassignment(const std::vector<std::size_t>& membership) {
  const std::size_t n = membership.size();
  std::vector<char> c(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && membership[i] == membership[j]) c[i * n + j] = 1;
  return c;
}

namespace {

std::size_t group_count(const std::vector<std::size_t>& m) {
  std::size_t g = 0;
  for (std::size_t v : m) g = std::max(g, v + 1);
  return g;
}

}  // namespace

SsiResult jaccard_ssi(const std::vector<std::size_t>& a,
                      const std::vector<std::size_t>& b) {
  if (a.size() != b.size())
    throw DataError("group assignments cover different numbers of items");
  const std::size_t n = a.size();
  SsiResult out;
  out.g1 = group_count(a);
  out.g2 = group_count(b);
  if (n == 0 || out.g1 == 0 || out.g2 == 0) {
    out.ssi = 1.0;
    return out;
  }

  // Cross-tabulate: m[ga][gb] = units in group ga of one grouping and gb of
  // the other. All ordered-pair counts reduce to sums over this table.
  std::vector<std::size_t> cross(out.g1 * out.g2, 0), na(out.g1, 0), nb(out.g2, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++cross[a[i] * out.g2 + b[i]];
    ++na[a[i]];
    ++nb[b[i]];
  }

  auto ratio = [](double n11, double n10, double n01) {
    const double denom = n11 + n10 + n01;
    return denom == 0.0 ? 1.0 : n11 / denom;
  };

  // Pairs (i, j), i != j, with i in the group: both-together, together only
  // here, together only in the other grouping.
  for (std::size_t ga = 0; ga < out.g1; ++ga) {
    double n11 = 0, n10 = 0, n01 = 0;
    for (std::size_t gb = 0; gb < out.g2; ++gb) {
      const double m = static_cast<double>(cross[ga * out.g2 + gb]);
      n11 += m * (m - 1.0);
      n10 += m * (static_cast<double>(na[ga]) - m);
      n01 += m * (static_cast<double>(nb[gb]) - m);
    }
    out.ratios.push_back(ratio(n11, n10, n01));
  }
  for (std::size_t gb = 0; gb < out.g2; ++gb) {
    double n11 = 0, n10 = 0, n01 = 0;
    for (std::size_t ga = 0; ga < out.g1; ++ga) {
      const double m = static_cast<double>(cross[ga * out.g2 + gb]);
      n11 += m * (m - 1.0);
      n10 += m * (static_cast<double>(nb[gb]) - m);
      n01 += m * (static_cast<double>(na[ga]) - m);
    }
    out.ratios.push_back(ratio(n11, n10, n01));
  }

  out.ssi = mean(out.ratios);
  return out;
}

namespace {

struct PairResult {
  std::vector<double> ssi;    // per depth
  std::vector<char> flagged;  // per depth
  // [depth][feature]: how many of the pair's two trees use the feature.
  std::vector<std::vector<unsigned>> feature_use;
};

std::vector<std::size_t> resample(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = rng.uniform_int(n);
  return idx;
}

}  // namespace

StabilityReport select_teacher(const Dataset& train, const StabilityParams& params) {
  if (params.bootstraps < 2) throw DataError("at least 2 bootstrap pairs required");
  if (params.teachers.empty()) throw DataError("no teachers given");
  if (params.depths.empty()) throw DataError("no depths given");
  for (std::size_t d : params.depths)
    if (d < 1) throw DataError("depths must be at least 1");
  validate_dataset(train);

  StabilityReport rep;
  rep.depths = params.depths;
  rep.bootstraps = params.bootstraps;
  rep.columns = train.columns;

  const std::size_t n = train.n, p = train.p;
  const std::size_t b_count = params.bootstraps;
  const std::size_t d_count = params.depths.size();
  const std::size_t d_max =
      *std::max_element(params.depths.begin(), params.depths.end());
  TreeParams grow = params.student;
  grow.max_depth = std::min(grow.max_depth, d_max);

  for (std::size_t t = 0; t < params.teachers.size(); ++t) {
    const TeacherOutput teacher = fit_teacher(
        train, params.teachers[t], derive_seed(params.seed, {kTagTeacher, t}),
        params.threads);

    std::vector<PairResult> pairs(b_count);
    parallel_for(b_count, params.threads, [&](std::size_t b) {
      PairResult pr;
      pr.ssi.resize(d_count);
      pr.flagged.resize(d_count, 0);
      pr.feature_use.assign(d_count, std::vector<unsigned>(p, 0));

      RegressionTree half[2];
      for (std::size_t h = 0; h < 2; ++h) {
        Rng rng(derive_seed(params.seed, {kTagBootstrap, t, b, h}));
        const std::vector<std::size_t> rows = resample(n, rng);
        std::vector<double> xb(n * p), yb(n);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t r = rows[i];
          std::copy(train.row(r), train.row(r) + p, xb.begin() + i * p);
          yb[i] = teacher.tau_hat[r];
        }
        half[h] = fit_tree(xb.data(), n, p, yb, grow);
      }

      for (std::size_t di = 0; di < d_count; ++di) {
        const std::size_t depth = params.depths[di];
        const RegressionTree ta = prune_to_depth(half[0], depth);
        const RegressionTree tb = prune_to_depth(half[1], depth);
        const std::size_t want = std::size_t{1} << depth;
        std::size_t leaves_a = 0, leaves_b = 0;
        for (const TreeNode& nd : ta.nodes)
          if (nd.is_leaf()) ++leaves_a;
        for (const TreeNode& nd : tb.nodes)
          if (nd.is_leaf()) ++leaves_b;
        if (leaves_a < want || leaves_b < want) pr.flagged[di] = 1;

        const auto ma = leaf_memberships(ta, train.x.data(), n);
        const auto mb = leaf_memberships(tb, train.x.data(), n);
        pr.ssi[di] = jaccard_ssi(ma, mb).ssi;

        for (const RegressionTree* tr : {&ta, &tb}) {
          std::vector<char> used(p, 0);
          for (const TreeNode& nd : tr->nodes)
            if (!nd.is_leaf()) used[nd.feature] = 1;
          for (std::size_t j = 0; j < p; ++j) pr.feature_use[di][j] += used[j];
        }
      }
      pairs[b] = std::move(pr);
    });

    TeacherStability ts;
    ts.name = teacher_name(params.teachers[t].kind);
    ts.ssi.assign(d_count, std::vector<double>(b_count, 0.0));
    ts.flagged.assign(d_count, std::vector<char>(b_count, 0));
    ts.feature_frequency.assign(d_count, std::vector<double>(p, 0.0));
    for (std::size_t di = 0; di < d_count; ++di) {
      for (std::size_t b = 0; b < b_count; ++b) {
        ts.ssi[di][b] = pairs[b].ssi[di];
        ts.flagged[di][b] = pairs[b].flagged[di];
        for (std::size_t j = 0; j < p; ++j)
          ts.feature_frequency[di][j] += pairs[b].feature_use[di][j];
      }
      for (std::size_t j = 0; j < p; ++j)
        ts.feature_frequency[di][j] /= static_cast<double>(2 * b_count);
      ts.mean_by_depth.push_back(mean(ts.ssi[di]));
      ts.se_by_depth.push_back(
          std::sqrt(sample_variance(ts.ssi[di]) / static_cast<double>(b_count)));
      double fr = 0;
      for (char f : ts.flagged[di]) fr += f;
      ts.flag_rate_by_depth.push_back(fr / static_cast<double>(b_count));
    }
    ts.mean_overall = mean(ts.mean_by_depth);
    rep.teachers.push_back(std::move(ts));
  }

  rep.recommended = 0;
  for (std::size_t t = 1; t < rep.teachers.size(); ++t)
    if (rep.teachers[t].mean_overall > rep.teachers[rep.recommended].mean_overall)
      rep.recommended = t;
  return rep;
}

std::string render_stability(const StabilityReport& rep) {
  std::string out;
  char buf[256];
  out += "teacher stability (";
  out += std::to_string(rep.bootstraps) + " bootstrap pairs)\n";
  for (const TeacherStability& ts : rep.teachers) {
    std::snprintf(buf, sizeof(buf), "  %-10s overall %.4f |", ts.name.c_str(),
                  ts.mean_overall);
    out += buf;
    for (std::size_t di = 0; di < rep.depths.size(); ++di) {
      std::snprintf(buf, sizeof(buf), "  d=%zu: %.4f (se %.4f)", rep.depths[di],
                    ts.mean_by_depth[di], ts.se_by_depth[di]);
      out += buf;
      if (ts.flag_rate_by_depth[di] > 0.0) {
        std::snprintf(buf, sizeof(buf), " [short trees: %.0f%%]",
                      100.0 * ts.flag_rate_by_depth[di]);
        out += buf;
      }
    }
    out += "\n";
  }
  out += "  recommended: " + rep.teachers[rep.recommended].name + "\n";
  return out;
}

}  // namespace cdt

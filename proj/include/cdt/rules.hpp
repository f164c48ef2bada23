#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cdt {

enum class RuleOp { LE, GT };

// One axis-aligned condition. LE keeps x[feature] <= threshold, mirroring
// how splits route rows (boundary values go left).
struct Rule {
  std::size_t feature = 0;
  RuleOp op = RuleOp::LE;
  double threshold = 0.0;
};

inline bool rule_matches(const Rule& r, const double* row) {
  return r.op == RuleOp::LE ? row[r.feature] <= r.threshold
                            : row[r.feature] > r.threshold;
}

// Conjunction of rules. An empty rule list matches everything.
struct Subgroup {
  std::vector<Rule> rules;
  bool contains(const double* row) const {
    for (const Rule& r : rules)
      if (!rule_matches(r, row)) return false;
    return true;
  }
};

// Disjoint cover of the covariate space, as produced by a tree's leaves.
struct Partition {
  std::size_t p = 0;
  std::vector<Subgroup> groups;
};

// Tightest-bound form: per feature at most one GT (lower bound) and one LE
// (upper bound), ordered by feature then lower-before-upper.
Subgroup canonical_subgroup(const std::vector<Rule>& path);

// "x1 > 0 & x2 <= 0.5", or "(all)" for the empty conjunction.
std::string subgroup_label(const Subgroup& g, const std::vector<std::string>& columns);

// Group index for every row; throws EstimationError if some row matches no
// group (cannot happen for tree partitions).
std::vector<std::size_t> assign(const Partition& part, const double* x, std::size_t n,
                                std::size_t p);

}  // namespace cdt

#include "cdt/rules.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "cdt/errors.hpp"

namespace cdt {

Subgroup canonical_subgroup(const std::vector<Rule>& path) {
  // Lower bound (GT) rises, upper bound (LE) falls as the path descends.
  std::map<std::size_t, std::pair<bool, double>> lower, upper;
  for (const Rule& r : path) {
    if (r.op == RuleOp::GT) {
      auto& e = lower[r.feature];
      if (!e.first || r.threshold > e.second) e = {true, r.threshold};
    } else {
      auto& e = upper[r.feature];
      if (!e.first || r.threshold < e.second) e = {true, r.threshold};
    }
  }
  Subgroup g;
  std::vector<std::size_t> feats;
  for (const auto& [f, _] : lower) feats.push_back(f);
  for (const auto& [f, _] : upper) feats.push_back(f);
  std::sort(feats.begin(), feats.end());
  feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
  for (std::size_t f : feats) {
    if (auto it = lower.find(f); it != lower.end())
      g.rules.push_back({f, RuleOp::GT, it->second.second});
    if (auto it = upper.find(f); it != upper.end())
      g.rules.push_back({f, RuleOp::LE, it->second.second});
  }
  return g;
}

std::string subgroup_label(const Subgroup& g, const std::vector<std::string>& columns) {
  if (g.rules.empty()) return "(all)";
  std::string out;
  char buf[64];
  for (const Rule& r : g.rules) {
    if (!out.empty()) out += " & ";
    std::snprintf(buf, sizeof(buf), "%.6g", r.threshold);
    out += columns.at(r.feature);
    out += r.op == RuleOp::LE ? " <= " : " > ";
    out += buf;
  }
  return out;
}

std::vector<std::size_t> assign(const Partition& part, const double* x, std::size_t n,
                                std::size_t p) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x + i * p;
    bool found = false;
    for (std::size_t g = 0; g < part.groups.size(); ++g) {
      if (part.groups[g].contains(row)) {
        out[i] = g;
        found = true;
        break;
      }
    }
    if (!found)
      throw EstimationError("row " + std::to_string(i + 1) +
                            " matches no subgroup of the partition");
  }
  return out;
}

}  // namespace cdt

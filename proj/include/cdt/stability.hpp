#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cdt/dataset.hpp"
#include "cdt/teacher.hpp"
#include "cdt/tree.hpp"

namespace cdt {

// Flattened n-by-n co-membership indicator: 1 iff distinct units i and j
// share a group. Symmetric, zero diagonal.
std::vector<char> coassignment(const std::vector<std::size_t>& membership);

struct SsiResult {
  double ssi = 1.0;
  // One ratio per group, first partition's groups then the second's.
  std::vector<double> ratios;
  std::size_t g1 = 0, g2 = 0;
};

// Agreement between two groupings of the same items: per group, the Jaccard
// ratio of co-membership ordered-pair counts (pairs agreeing in both
// groupings over pairs present in either), singleton groups scoring 1; the
// index is the mean ratio across both groupings' groups.
SsiResult jaccard_ssi(const std::vector<std::size_t>& a,
                      const std::vector<std::size_t>& b);

struct StabilityParams {
  std::vector<TeacherSpec> teachers;
  std::vector<std::size_t> depths = {1, 2, 3, 4};
  std::size_t bootstraps = 100;
  TreeParams student{.complexity = 0.01};  // same rpart-style defaults as CdtConfig
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct TeacherStability {
  std::string name;
  std::vector<std::vector<double>> ssi;     // [depth][bootstrap pair]
  std::vector<std::vector<char>> flagged;   // pair where a tree missed 2^d leaves
  std::vector<double> mean_by_depth;
  std::vector<double> se_by_depth;
  std::vector<double> flag_rate_by_depth;
  double mean_overall = 0.0;
  // [depth][feature]: share of the 2B resampled trees splitting on it.
  std::vector<std::vector<double>> feature_frequency;
};

struct StabilityReport {
  std::vector<std::size_t> depths;
  std::size_t bootstraps = 0;
  std::vector<std::string> columns;
  std::vector<TeacherStability> teachers;
  std::size_t recommended = 0;  // ties go to the earlier entry
};

// Ranks candidate teachers by how reproducible their student partitions
// are: each teacher's effect predictions are fit once on the training rows;
// per bootstrap pair two students are grown on independent with-replacement
// resamples, cut to each depth, and compared on the original rows.
StabilityReport select_teacher(const Dataset& train, const StabilityParams& params);

std::string render_stability(const StabilityReport& report);

}  // namespace cdt

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdt/dataset.hpp"
#include "cdt/inference.hpp"
#include "cdt/teacher.hpp"
#include "cdt/tree.hpp"

namespace cdt {

enum class PruneMode { Cv, Depth, None };

struct CdtConfig {
  double pi_train = 0.70;
  TeacherSpec teacher;
  // Student defaults track rpart: min_leaf 7, min_split 20, and a split must
  // recover at least 1% of the root SSE before it is kept.
  TreeParams student{.complexity = 0.01};
  PruneMode prune = PruneMode::Cv;
  std::size_t prune_depth = 2;  // PruneMode::Depth only
  std::size_t cv_folds = 10;
  HetVariant het_variant = HetVariant::CochranQ;
  bool use_dr = false;
  PropensityConfig est_propensity;  // for the adjusted estimator
  std::size_t threads = 0;
};

struct SubgroupEstimate {
  Subgroup rules;
  std::string label;
  std::size_t n = 0, n_treated = 0, n_control = 0;
  std::optional<double> tau, se;
  std::optional<double> dr_tau, dr_se;
};

struct NodeDiagnostic {
  std::string label;
  std::size_t n = 0, n_treated = 0, n_control = 0;
  double tau_min = 0, tau_q25 = 0, tau_median = 0, tau_q75 = 0, tau_max = 0;
};

struct SplitCounts {
  std::size_t n_train = 0, n_est = 0;
  std::size_t train_treated = 0, train_control = 0;
  std::size_t est_treated = 0, est_control = 0;
};

struct CdtReport {
  std::string method;
  std::uint64_t seed = 0;
  CdtConfig config;
  std::size_t n = 0, p = 0;
  std::vector<std::string> columns;
  SplitCounts counts;
  std::optional<double> chosen_alpha;  // CV pruning only
  RegressionTree tree;                 // pruned student
  Partition partition;
  std::vector<SubgroupEstimate> subgroups;
  std::optional<double> overall_tau;   // estimation-split difference in means
  HetTest het;
  double student_rmse = 0.0;
  std::size_t teacher_oob_fallbacks = 0;
  std::vector<NodeDiagnostic> nodes;
  std::vector<std::string> warnings;
};

struct SplitIndices {
  std::vector<std::size_t> train, est;
};

// floor(pi_train * n) training rows, stratified by arm so both splits keep
// both arms; rows stay in ascending order inside each side.
SplitIndices honest_split(const Dataset& data, double pi_train, std::uint64_t seed);

// Full run: split, teacher on the training side, student tree on the
// teacher's effect predictions, pruning, honest subgroup estimates and the
// heterogeneity test on the held-out side.
CdtReport run_cdt(const Dataset& data, const CdtConfig& cfg, std::uint64_t seed);

// Shared tail: student + pruning + honest estimation for caller-provided
// training targets. run_cdt feeds teacher predictions through here; the
// transformed-outcome baseline feeds its pseudo-outcomes.
CdtReport run_with_train_targets(const Dataset& data, const SplitIndices& split,
                                 const std::vector<double>& train_targets,
                                 const CdtConfig& cfg, std::uint64_t seed,
                                 const std::string& method);

// Leaf-by-leaf text like the report figures: rules, honest effect (standard
// error), and arm counts.
std::string render_report(const CdtReport& report);

}  // namespace cdt

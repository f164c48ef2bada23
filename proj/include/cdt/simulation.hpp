#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdt/dataset.hpp"
#include "cdt/pipeline.hpp"
#include "cdt/rules.hpp"

namespace cdt {

enum class Dgp { And, Additive, Or };
enum class OutcomeModel { CateOnly, LinearCovariates };

std::string dgp_name(Dgp dgp);
Dgp dgp_from_name(const std::string& name);  // DataError on junk
std::string outcome_name(OutcomeModel m);
OutcomeModel outcome_from_name(const std::string& name);

struct DgpConfig {
  Dgp dgp = Dgp::And;
  OutcomeModel outcome = OutcomeModel::CateOnly;
  std::size_t n = 500;
  std::size_t p = 10;
  double pve = 1.0;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Dgp dgp = Dgp::And;
  std::vector<std::size_t> features;               // always {0, 1}
  std::vector<std::vector<double>> thresholds;     // per entry of features
  double sigma_tau = 0.0;
  // Noise-free effect at a covariate row.
  double signal_at(const double* row) const;
};

// Variance of the noise-free effect under independent standard-normal
// covariates, in closed form.
double signal_variance(Dgp dgp);

// Effect-noise scale sigma so that var(signal) / (var(signal) + sigma^2)
// equals the requested share.
double pve_to_sigma(Dgp dgp, double pve);  // DataError outside (0, 1]

struct SimData {
  Dataset data;
  GroundTruth truth;
  std::vector<double> tau;  // realized per-unit effects, noise included
};

SimData gen_dataset(const DgpConfig& cfg);

// No-distillation reference: the same split / student / honest-estimation
// path, trained directly on the inverse-probability pseudo-outcome
// y (z - e) / (e (1 - e)) instead of teacher predictions.
CdtReport transformed_outcome_tree(const Dataset& data, double e,
                                   const CdtConfig& cfg, std::uint64_t seed);

struct SelectionScore {
  std::size_t tp = 0, fp = 0, fn = 0;
  double f1 = 0.0;
};

// Compares the features named by the partition's rules against the truth.
SelectionScore evaluate_selection(const Partition& part, const GroundTruth& truth);

// Per true feature: RMSE of that feature's rule thresholds against the
// nearest true threshold; empty where the feature is never split.
std::vector<std::optional<double>> threshold_rmse(const Partition& part,
                                                  const GroundTruth& truth);

struct AteRmseResult {
  double value = 0.0;
  std::size_t mc_used = 0;  // covariate draws consumed
  bool widened = false;     // a thin subgroup forced extra draws
};

// RMSE between the report's honest subgroup estimates and the true mean
// effect over each estimated region, the latter by Monte Carlo.
AteRmseResult subgroup_ate_rmse(const CdtReport& rep, const GroundTruth& truth,
                                std::size_t mc_n, std::uint64_t seed);

struct StudyMethod {
  std::string name;    // teacher name, or "baseline"
  bool baseline = false;
  TeacherSpec teacher;
};

StudyMethod study_method(const std::string& name);  // DataError on junk

struct StudyConfig {
  std::vector<DgpConfig> cells;
  std::vector<StudyMethod> methods;
  std::size_t replicates = 20;
  CdtConfig pipeline;       // teacher field overridden per method
  std::size_t mc_n = 100000;  // 0 skips the subgroup-effect RMSE
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct StudyRow {
  std::size_t cell = 0;
  std::size_t replicate = 0;
  std::string dgp, outcome, method;
  std::size_t n = 0;
  double pve = 1.0;
  bool failed = false;
  std::string error;
  std::size_t tp = 0, fp = 0;
  double f1 = 0.0;
  std::optional<double> rmse_x1, rmse_x2;
  std::optional<double> ate_rmse;
  std::size_t n_subgroups = 0;
};

// One row per (cell, replicate, method); all methods inside a replicate see
// the same dataset and the same split. A failed run yields an error row.
std::vector<StudyRow> run_replicates(const StudyConfig& cfg);

// Fixed column order, one line per row, suitable for plotting tools.
std::string study_csv(const std::vector<StudyRow>& rows);

struct MetricSummary {
  std::optional<double> mean, se;  // se needs two contributing rows
  std::size_t count = 0;
};

struct StudySummary {
  std::size_t cell = 0;
  std::string dgp, outcome, method;
  std::size_t n = 0;
  double pve = 1.0;
  std::size_t runs = 0, failures = 0;
  MetricSummary tp, fp, f1, n_subgroups, rmse_x1, rmse_x2, ate_rmse;
};

// Mean and standard error per (cell, method) over the non-failed rows;
// optional metrics aggregate over the rows where they are defined.
std::vector<StudySummary> aggregate_study(const std::vector<StudyRow>& rows);
std::string summary_csv(const std::vector<StudySummary>& summaries);

}  // namespace cdt

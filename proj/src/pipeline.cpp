#include "cdt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cdt/errors.hpp"
#include "cdt/random.hpp"
#include "cdt/stats.hpp"

namespace cdt {

SplitIndices honest_split(const Dataset& data, double pi_train, std::uint64_t seed) {
  if (!(pi_train > 0.0 && pi_train < 1.0))
    throw DataError("pi_train must be strictly between 0 and 1");
  const std::size_t n = data.n;
  std::vector<std::size_t> idx1, idx0;
  for (std::size_t i = 0; i < n; ++i) (data.z[i] == 1 ? idx1 : idx0).push_back(i);
  const std::size_t n1 = idx1.size(), n0 = idx0.size();
  const std::size_t n_train =
      static_cast<std::size_t>(pi_train * static_cast<double>(n));
  if (n1 < 2 || n0 < 2 || n_train < 2 || n - n_train < 2)
    throw EstimationError("too few rows per arm to keep both arms in both splits");

  // Arm-stratified sizes; nudged so each arm appears on each side while the
  // total stays floor(pi_train * n).
  std::size_t t1 = static_cast<std::size_t>(pi_train * static_cast<double>(n1));
  t1 = std::clamp<std::size_t>(t1, 1, n1 - 1);
  std::size_t t0 = n_train - std::min(n_train, t1);
  if (t0 < 1 || t0 > n0 - 1) {
    t0 = std::clamp<std::size_t>(t0, 1, n0 - 1);
    t1 = n_train - t0;
    if (t1 < 1 || t1 > n1 - 1)
      throw EstimationError("arm sizes cannot satisfy the training fraction");
  }

  Rng rng(derive_seed(seed, {kTagSplitData}));
  rng.shuffle(idx1);
  rng.shuffle(idx0);
  SplitIndices out;
  out.train.assign(idx1.begin(), idx1.begin() + t1);
  out.train.insert(out.train.end(), idx0.begin(), idx0.begin() + t0);
  out.est.assign(idx1.begin() + t1, idx1.end());
  out.est.insert(out.est.end(), idx0.begin() + t0, idx0.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.est.begin(), out.est.end());
  return out;
}

namespace {

std::string arm_warning(const SubgroupEstimate& est) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "subgroup '%s': estimate undefined (treated=%zu, control=%zu)",
                est.label.c_str(), est.n_treated, est.n_control);
  return buf;
}

}  // namespace

CdtReport run_with_train_targets(const Dataset& data, const SplitIndices& split,
                                 const std::vector<double>& train_targets,
                                 const CdtConfig& cfg, std::uint64_t seed,
                                 const std::string& method) {
  const Dataset train = data.subset(split.train);
  const Dataset est = data.subset(split.est);
  if (train_targets.size() != train.n)
    throw DataError("training target length does not match the training split");

  CdtReport rep;
  rep.method = method;
  rep.seed = seed;
  rep.config = cfg;
  rep.n = data.n;
  rep.p = data.p;
  rep.columns = data.columns;
  rep.counts.n_train = train.n;
  rep.counts.n_est = est.n;
  rep.counts.train_treated = train.arm_count(1);
  rep.counts.train_control = train.n - rep.counts.train_treated;
  rep.counts.est_treated = est.arm_count(1);
  rep.counts.est_control = est.n - rep.counts.est_treated;

  switch (cfg.prune) {
    case PruneMode::Cv: {
      CvPruneResult cv = cv_prune(train.x.data(), train.n, train.p, train_targets,
                                  cfg.student, cfg.cv_folds,
                                  derive_seed(seed, {kTagStudent}));
      rep.tree = std::move(cv.tree);
      rep.chosen_alpha = cv.chosen_alpha;
      break;
    }
    case PruneMode::Depth: {
      const RegressionTree full =
          fit_tree(train.x.data(), train.n, train.p, train_targets, cfg.student);
      rep.tree = prune_to_depth(full, cfg.prune_depth);
      break;
    }
    case PruneMode::None:
      rep.tree = fit_tree(train.x.data(), train.n, train.p, train_targets, cfg.student);
      break;
  }

  rep.partition = partition_from_tree(rep.tree);
  const auto est_groups = leaf_memberships(rep.tree, est.x.data(), est.n);
  const auto train_groups = leaf_memberships(rep.tree, train.x.data(), train.n);
  const std::size_t n_groups = rep.partition.groups.size();

  // Honest subgroup estimates from the held-out side only.
  for (std::size_t g = 0; g < n_groups; ++g) {
    SubgroupEstimate e;
    e.rules = rep.partition.groups[g];
    e.label = subgroup_label(e.rules, data.columns);
    std::vector<double> yg;
    std::vector<int> zg;
    for (std::size_t i = 0; i < est.n; ++i) {
      if (est_groups[i] != g) continue;
      yg.push_back(est.y[i]);
      zg.push_back(est.z[i]);
      ++e.n;
      if (est.z[i] == 1)
        ++e.n_treated;
      else
        ++e.n_control;
    }
    e.tau = subgroup_dim(yg, zg);
    if (const auto v = subgroup_variance(yg, zg)) e.se = std::sqrt(*v);
    if (!e.tau || !e.se) rep.warnings.push_back(arm_warning(e));
    rep.subgroups.push_back(std::move(e));
  }

  {
    std::vector<double> ye = est.y;
    std::vector<int> ze = est.z;
    rep.overall_tau = subgroup_dim(ye, ze);
  }

  // Heterogeneity test over the subgroup estimates; skipped whenever any
  // variance is undefined.
  {
    std::vector<double> taus, vars;
    bool all_defined = true;
    for (const SubgroupEstimate& e : rep.subgroups) {
      if (!e.tau || !e.se) {
        all_defined = false;
        break;
      }
      taus.push_back(*e.tau);
      vars.push_back(*e.se * *e.se);
    }
    if (!all_defined) {
      rep.het.skipped = true;
      rep.het.reason = "a subgroup variance is undefined";
      rep.het.variant = cfg.het_variant;
    } else {
      rep.het = heterogeneity_test(taus, vars, cfg.het_variant,
                                   rep.overall_tau.value_or(0.0));
    }
  }

  // Adjusted estimates if requested.
  if (cfg.use_dr) {
    std::vector<double> e_est(est.n, cfg.est_propensity.known_e);
    if (cfg.est_propensity.estimate) {
      const PropensityFit pf = fit_propensity(est.x.data(), est.n, est.p, est.z);
      e_est = pf.e;
      if (pf.separation_warning)
        rep.warnings.push_back("propensity fit did not converge cleanly");
    }
    for (std::size_t g = 0; g < n_groups; ++g) {
      std::vector<double> xg, yg, eg;
      std::vector<int> zg;
      for (std::size_t i = 0; i < est.n; ++i) {
        if (est_groups[i] != g) continue;
        xg.insert(xg.end(), est.row(i), est.row(i) + est.p);
        yg.push_back(est.y[i]);
        zg.push_back(est.z[i]);
        eg.push_back(e_est[i]);
      }
      const DrEstimate dr =
          dr_weighted_adjusted(xg.data(), yg.size(), est.p, yg, zg, eg);
      if (dr.defined) {
        rep.subgroups[g].dr_tau = dr.tau;
        rep.subgroups[g].dr_se = std::sqrt(std::max(0.0, dr.variance));
        for (std::size_t c : dr.dropped_columns)
          rep.warnings.push_back("subgroup '" + rep.subgroups[g].label +
                                 "': adjusted fit dropped collinear column " +
                                 data.columns[c]);
      } else {
        rep.warnings.push_back("subgroup '" + rep.subgroups[g].label +
                               "': adjusted estimate unavailable (" + dr.reason + ")");
      }
    }
  }

  // Training-side diagnostics.
  {
    const auto preds = rep.tree.predict(train.x.data(), train.n);
    double sse = 0.0;
    for (std::size_t i = 0; i < train.n; ++i) {
      const double d = preds[i] - train_targets[i];
      sse += d * d;
    }
    rep.student_rmse = std::sqrt(sse / static_cast<double>(train.n));
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    NodeDiagnostic nd;
    nd.label = rep.subgroups[g].label;
    std::vector<double> tg;
    for (std::size_t i = 0; i < train.n; ++i) {
      if (train_groups[i] != g) continue;
      tg.push_back(train_targets[i]);
      ++nd.n;
      if (train.z[i] == 1)
        ++nd.n_treated;
      else
        ++nd.n_control;
    }
    if (!tg.empty()) {
      nd.tau_min = quantile(tg, 0.0);
      nd.tau_q25 = quantile(tg, 0.25);
      nd.tau_median = quantile(tg, 0.5);
      nd.tau_q75 = quantile(tg, 0.75);
      nd.tau_max = quantile(tg, 1.0);
    }
    rep.nodes.push_back(std::move(nd));
  }
  return rep;
}

CdtReport run_cdt(const Dataset& data, const CdtConfig& cfg, std::uint64_t seed) {
  validate_dataset(data);
  const SplitIndices split = honest_split(data, cfg.pi_train, seed);
  const Dataset train = data.subset(split.train);
  const TeacherOutput teacher =
      fit_teacher(train, cfg.teacher, derive_seed(seed, {kTagTeacher}), cfg.threads);
  CdtReport rep =
      run_with_train_targets(data, split, teacher.tau_hat, cfg, seed,
                             "cdt-" + teacher_name(cfg.teacher.kind));
  rep.teacher_oob_fallbacks = teacher.oob_fallbacks;
  if (teacher.oob_fallbacks > 0)
    rep.warnings.push_back(std::to_string(teacher.oob_fallbacks) +
                           " training rows had no out-of-bag trees; whole-forest "
                           "predictions were used for them");
  return rep;
}

std::string render_report(const CdtReport& rep) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s  (n=%zu, train=%zu, estimation=%zu)\n",
                rep.method.c_str(), rep.n, rep.counts.n_train, rep.counts.n_est);
  out += buf;
  for (const SubgroupEstimate& e : rep.subgroups) {
    if (e.tau && e.se)
      std::snprintf(buf, sizeof(buf), "  %-48s  %8.4f (%.4f)   n1/n0 = %zu/%zu\n",
                    e.label.c_str(), *e.tau, *e.se, e.n_treated, e.n_control);
    else
      std::snprintf(buf, sizeof(buf), "  %-48s  undefined          n1/n0 = %zu/%zu\n",
                    e.label.c_str(), e.n_treated, e.n_control);
    out += buf;
    if (e.dr_tau && e.dr_se) {
      std::snprintf(buf, sizeof(buf), "  %-48s  %8.4f (%.4f)   adjusted\n", "",
                    *e.dr_tau, *e.dr_se);
      out += buf;
    }
  }
  if (!rep.het.skipped) {
    std::snprintf(buf, sizeof(buf),
                  "  heterogeneity: statistic=%.4f df=%g p=%.4g (%s)\n",
                  rep.het.statistic, rep.het.df, rep.het.p_value,
                  rep.het.variant == HetVariant::CochranQ ? "cochran-q" : "projection");
    out += buf;
  } else {
    out += "  heterogeneity: skipped (" + rep.het.reason + ")\n";
  }
  return out;
}

}  // namespace cdt

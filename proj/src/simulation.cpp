#include "cdt/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cdt/csv.hpp"
#include "cdt/errors.hpp"
#include "cdt/parallel.hpp"
#include "cdt/random.hpp"
#include "cdt/stats.hpp"

namespace cdt {

std::string dgp_name(Dgp dgp) {
  switch (dgp) {
    case Dgp::And: return "and";
    case Dgp::Additive: return "additive";
    case Dgp::Or: return "or";
  }
  return "?";
}

Dgp dgp_from_name(const std::string& name) {
  if (name == "and") return Dgp::And;
  if (name == "additive") return Dgp::Additive;
  if (name == "or") return Dgp::Or;
  throw DataError("unknown effect surface '" + name + "' (and, additive, or)");
}

std::string outcome_name(OutcomeModel m) {
  return m == OutcomeModel::CateOnly ? "effect-only" : "linear-covariates";
}

OutcomeModel outcome_from_name(const std::string& name) {
  if (name == "effect-only") return OutcomeModel::CateOnly;
  if (name == "linear-covariates") return OutcomeModel::LinearCovariates;
  throw DataError("unknown outcome model '" + name +
                  "' (effect-only, linear-covariates)");
}

namespace {

double signal(Dgp dgp, double x1, double x2) {
  switch (dgp) {
    case Dgp::And:
      return 2.0 * (x1 > 0.0) * (x2 > 0.5);
    case Dgp::Additive:
      return 2.0 * (x1 > 0.0) - 1.0 * (x2 < -0.5);
    case Dgp::Or:
      return 2.0 * (x1 > 0.0) - 1.0 * (x2 > 0.5 || x2 < -0.5);
  }
  return 0.0;
}

}  // namespace

double GroundTruth::signal_at(const double* row) const {
  return signal(dgp, row[0], row[1]);
}

double signal_variance(Dgp dgp) {
  // Indicator variances under independent standard-normal covariates.
  switch (dgp) {
    case Dgp::And: {
      const double p = 0.5 * (1.0 - normal_cdf(0.5));
      return 4.0 * p * (1.0 - p);
    }
    case Dgp::Additive: {
      const double q = normal_cdf(-0.5);
      return 1.0 + q * (1.0 - q);
    }
    case Dgp::Or: {
      const double r = 2.0 * normal_cdf(-0.5);
      return 1.0 + r * (1.0 - r);
    }
  }
  return 0.0;
}

double pve_to_sigma(Dgp dgp, double pve) {
  if (!(pve > 0.0 && pve <= 1.0))
    throw DataError("variance-explained share must lie in (0, 1]");
  const double v = signal_variance(dgp);
  return std::sqrt(v * (1.0 / pve - 1.0));
}

SimData gen_dataset(const DgpConfig& cfg) {
  if (cfg.n < 1) throw DataError("need at least one row");
  if (cfg.p < 2) throw DataError("the effect surface uses the first two covariates");
  if (cfg.outcome == OutcomeModel::LinearCovariates && cfg.p < 4)
    throw DataError("the linear outcome uses the third and fourth covariates");

  SimData out;
  out.truth.dgp = cfg.dgp;
  out.truth.features = {0, 1};
  switch (cfg.dgp) {
    case Dgp::And: out.truth.thresholds = {{0.0}, {0.5}}; break;
    case Dgp::Additive: out.truth.thresholds = {{0.0}, {-0.5}}; break;
    case Dgp::Or: out.truth.thresholds = {{0.0}, {-0.5, 0.5}}; break;
  }
  out.truth.sigma_tau = pve_to_sigma(cfg.dgp, cfg.pve);

  Dataset& d = out.data;
  d.n = cfg.n;
  d.p = cfg.p;
  d.x.resize(cfg.n * cfg.p);
  d.y.resize(cfg.n);
  d.z.resize(cfg.n);
  for (std::size_t j = 0; j < cfg.p; ++j)
    d.columns.push_back("x" + std::to_string(j + 1));

  Rng rx(derive_seed(cfg.seed, {kTagSimX}));
  for (double& v : d.x) v = rx.normal();
  Rng rz(derive_seed(cfg.seed, {kTagSimZ}));
  for (std::size_t i = 0; i < cfg.n; ++i) d.z[i] = rz.bernoulli(0.5) ? 1 : 0;
  Rng re(derive_seed(cfg.seed, {kTagSimTauNoise}));
  out.tau.resize(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i)
    out.tau[i] = out.truth.signal_at(d.row(i)) + out.truth.sigma_tau * re.normal();
  Rng rn(derive_seed(cfg.seed, {kTagSimOutcomeNoise}));
  for (std::size_t i = 0; i < cfg.n; ++i) {
    double y = d.z[i] * out.tau[i] + 0.1 * rn.normal();
    if (cfg.outcome == OutcomeModel::LinearCovariates)
      y += d.xat(i, 2) + d.xat(i, 3);
    d.y[i] = y;
  }
  return out;
}

CdtReport transformed_outcome_tree(const Dataset& data, double e,
                                   const CdtConfig& cfg, std::uint64_t seed) {
  if (!(e > 0.0 && e < 1.0))
    throw DataError("propensity must lie strictly inside (0, 1)");
  validate_dataset(data);
  const SplitIndices split = honest_split(data, cfg.pi_train, seed);
  std::vector<double> pseudo;
  pseudo.reserve(split.train.size());
  const double denom = e * (1.0 - e);
  for (std::size_t i : split.train)
    pseudo.push_back(data.y[i] * (data.z[i] - e) / denom);
  return run_with_train_targets(data, split, pseudo, cfg, seed, "transformed-outcome");
}

SelectionScore evaluate_selection(const Partition& part, const GroundTruth& truth) {
  std::vector<char> selected(part.p, 0);
  for (const Subgroup& g : part.groups)
    for (const Rule& r : g.rules) selected[r.feature] = 1;

  SelectionScore s;
  std::vector<char> is_true(part.p, 0);
  for (std::size_t f : truth.features)
    if (f < part.p) is_true[f] = 1;
  for (std::size_t j = 0; j < part.p; ++j) {
    if (selected[j] && is_true[j]) ++s.tp;
    if (selected[j] && !is_true[j]) ++s.fp;
    if (!selected[j] && is_true[j]) ++s.fn;
  }
  const double denom = 2.0 * s.tp + s.fp + s.fn;
  s.f1 = denom == 0.0 ? 1.0 : 2.0 * s.tp / denom;
  return s;
}

std::vector<std::optional<double>> threshold_rmse(const Partition& part,
                                                  const GroundTruth& truth) {
  std::vector<std::optional<double>> out(truth.features.size());
  for (std::size_t fi = 0; fi < truth.features.size(); ++fi) {
    const std::size_t feature = truth.features[fi];
    std::vector<double> cuts;
    for (const Subgroup& g : part.groups)
      for (const Rule& r : g.rules)
        if (r.feature == feature) cuts.push_back(r.threshold);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    if (cuts.empty()) continue;
    double sq = 0.0;
    for (double c : cuts) {
      double best = 1e300;
      for (double t : truth.thresholds[fi]) best = std::min(best, std::abs(c - t));
      sq += best * best;
    }
    out[fi] = std::sqrt(sq / static_cast<double>(cuts.size()));
  }
  return out;
}

AteRmseResult subgroup_ate_rmse(const CdtReport& rep, const GroundTruth& truth,
                                std::size_t mc_n, std::uint64_t seed) {
  const std::size_t groups = rep.partition.groups.size();
  if (groups == 0) throw DataError("empty partition");
  if (mc_n == 0) throw DataError("need a positive sample size");
  for (const SubgroupEstimate& e : rep.subgroups)
    if (!e.tau) throw EstimationError("subgroup '" + e.label + "' has no estimate");

  AteRmseResult res;
  std::vector<double> sums(groups, 0.0);
  std::vector<std::size_t> counts(groups, 0);
  Rng rng(derive_seed(seed, {kTagMonteCarlo}));
  const std::size_t p = rep.p;
  std::vector<double> draws(mc_n * p);

  const std::size_t passes_max = 6;  // initial pass plus five widenings
  for (std::size_t pass = 0; pass < passes_max; ++pass) {
    for (double& v : draws) v = rng.normal();
    const std::vector<std::size_t> member = assign(rep.partition, draws.data(), mc_n, p);
    for (std::size_t i = 0; i < mc_n; ++i) {
      sums[member[i]] += signal(truth.dgp, draws[i * p], draws[i * p + 1]);
      ++counts[member[i]];
    }
    res.mc_used += mc_n;
    const std::size_t thin = *std::min_element(counts.begin(), counts.end());
    if (thin >= 100) break;
    res.widened = true;
  }

  double sq = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    if (counts[g] == 0)
      throw EstimationError("subgroup '" + rep.subgroups[g].label +
                            "' captured no simulated points");
    const double diff = *rep.subgroups[g].tau - sums[g] / counts[g];
    sq += diff * diff;
  }
  res.value = std::sqrt(sq / static_cast<double>(groups));
  return res;
}

StudyMethod study_method(const std::string& name) {
  StudyMethod m;
  if (name == "baseline" || name == "transformed-outcome") {
    m.name = "baseline";
    m.baseline = true;
    return m;
  }
  std::string t = name;
  if (t.rfind("cdt-", 0) == 0) t = t.substr(4);
  if (t == "tforest") t = "t-forest";
  if (t == "sgbt") t = "s-gbt";
  if (t == "rgbt") t = "r-gbt";
  m.teacher.kind = teacher_from_name(t);
  m.name = "cdt-" + t;
  return m;
}

std::vector<StudyRow> run_replicates(const StudyConfig& cfg) {
  if (cfg.replicates < 1) throw DataError("need at least one replicate");
  if (cfg.cells.empty()) throw DataError("no study cells");
  if (cfg.methods.empty()) throw DataError("no methods");

  const std::size_t runs = cfg.cells.size() * cfg.replicates;
  std::vector<std::vector<StudyRow>> slots(runs);
  const std::size_t outer = resolve_threads(cfg.threads);
  const std::size_t inner = outer > 1 ? 1 : cfg.threads;

  parallel_for(runs, cfg.threads, [&](std::size_t run) {
    const std::size_t c = run / cfg.replicates;
    const std::size_t r = run % cfg.replicates;
    DgpConfig dgp = cfg.cells[c];
    dgp.seed = derive_seed(cfg.seed, {kTagReplicate, c, r});
    SimData sim;
    std::string gen_error;
    try {
      sim = gen_dataset(dgp);
    } catch (const std::exception& e) {
      gen_error = e.what();
    }

    for (const StudyMethod& method : cfg.methods) {
      StudyRow row;
      row.cell = c;
      row.replicate = r;
      row.dgp = dgp_name(dgp.dgp);
      row.outcome = outcome_name(dgp.outcome);
      row.method = method.name;
      row.n = dgp.n;
      row.pve = dgp.pve;
      if (!gen_error.empty()) {
        row.failed = true;
        row.error = gen_error;
        slots[run].push_back(std::move(row));
        continue;
      }
      try {
        CdtConfig pipe = cfg.pipeline;
        pipe.threads = inner;
        CdtReport rep;
        if (method.baseline) {
          rep = transformed_outcome_tree(sim.data, 0.5, pipe, dgp.seed);
        } else {
          pipe.teacher = method.teacher;
          rep = run_cdt(sim.data, pipe, dgp.seed);
        }
        const SelectionScore sel = evaluate_selection(rep.partition, sim.truth);
        row.tp = sel.tp;
        row.fp = sel.fp;
        row.f1 = sel.f1;
        const auto thr = threshold_rmse(rep.partition, sim.truth);
        if (thr.size() > 0) row.rmse_x1 = thr[0];
        if (thr.size() > 1) row.rmse_x2 = thr[1];
        row.n_subgroups = rep.partition.groups.size();
        if (cfg.mc_n > 0) {
          bool defined = true;
          for (const SubgroupEstimate& e : rep.subgroups)
            if (!e.tau) defined = false;
          if (defined)
            row.ate_rmse = subgroup_ate_rmse(rep, sim.truth, cfg.mc_n,
                                             derive_seed(cfg.seed,
                                                         {kTagMonteCarlo, c, r}))
                               .value;
        }
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      slots[run].push_back(std::move(row));
    }
  });

  std::vector<StudyRow> rows;
  rows.reserve(runs * cfg.methods.size());
  for (auto& slot : slots)
    for (auto& row : slot) rows.push_back(std::move(row));
  return rows;
}

std::vector<StudySummary> aggregate_study(const std::vector<StudyRow>& rows) {
  // Preserve first-appearance order of (cell, method) pairs.
  std::vector<StudySummary> out;
  std::vector<std::vector<const StudyRow*>> buckets;
  for (const StudyRow& r : rows) {
    std::size_t k = out.size();
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i].cell == r.cell && out[i].method == r.method) {
        k = i;
        break;
      }
    if (k == out.size()) {
      StudySummary s;
      s.cell = r.cell;
      s.dgp = r.dgp;
      s.outcome = r.outcome;
      s.method = r.method;
      s.n = r.n;
      s.pve = r.pve;
      out.push_back(std::move(s));
      buckets.emplace_back();
    }
    ++out[k].runs;
    if (r.failed)
      ++out[k].failures;
    else
      buckets[k].push_back(&r);
  }

  auto summarize = [](const std::vector<double>& v) {
    MetricSummary m;
    m.count = v.size();
    if (!v.empty()) m.mean = mean(v);
    if (v.size() >= 2)
      m.se = std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
    return m;
  };

  for (std::size_t k = 0; k < out.size(); ++k) {
    std::vector<double> tp, fp, f1, ng, rx1, rx2, ate;
    for (const StudyRow* r : buckets[k]) {
      tp.push_back(static_cast<double>(r->tp));
      fp.push_back(static_cast<double>(r->fp));
      f1.push_back(r->f1);
      ng.push_back(static_cast<double>(r->n_subgroups));
      if (r->rmse_x1) rx1.push_back(*r->rmse_x1);
      if (r->rmse_x2) rx2.push_back(*r->rmse_x2);
      if (r->ate_rmse) ate.push_back(*r->ate_rmse);
    }
    out[k].tp = summarize(tp);
    out[k].fp = summarize(fp);
    out[k].f1 = summarize(f1);
    out[k].n_subgroups = summarize(ng);
    out[k].rmse_x1 = summarize(rx1);
    out[k].rmse_x2 = summarize(rx2);
    out[k].ate_rmse = summarize(ate);
  }
  return out;
}

std::string summary_csv(const std::vector<StudySummary>& summaries) {
  CsvTable t;
  t.header = {"cell", "dgp", "outcome", "n", "pve", "method", "runs", "failures",
              "tp_mean", "tp_se", "fp_mean", "fp_se", "f1_mean", "f1_se",
              "n_subgroups_mean", "n_subgroups_se", "rmse_x1_mean", "rmse_x1_se",
              "rmse_x1_count", "rmse_x2_mean", "rmse_x2_se", "rmse_x2_count",
              "ate_rmse_mean", "ate_rmse_se", "ate_rmse_count"};
  char buf[64];
  auto opt = [&buf](const std::optional<double>& v) {
    if (!v) return std::string();
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return std::string(buf);
  };
  for (const StudySummary& s : summaries) {
    std::snprintf(buf, sizeof(buf), "%.17g", s.pve);
    t.rows.push_back({std::to_string(s.cell), s.dgp, s.outcome, std::to_string(s.n),
                      std::string(buf), s.method, std::to_string(s.runs),
                      std::to_string(s.failures), opt(s.tp.mean), opt(s.tp.se),
                      opt(s.fp.mean), opt(s.fp.se), opt(s.f1.mean), opt(s.f1.se),
                      opt(s.n_subgroups.mean), opt(s.n_subgroups.se),
                      opt(s.rmse_x1.mean), opt(s.rmse_x1.se),
                      std::to_string(s.rmse_x1.count), opt(s.rmse_x2.mean),
                      opt(s.rmse_x2.se), std::to_string(s.rmse_x2.count),
                      opt(s.ate_rmse.mean), opt(s.ate_rmse.se),
                      std::to_string(s.ate_rmse.count)});
  }
  return write_csv(t);
}

std::string study_csv(const std::vector<StudyRow>& rows) {
  CsvTable t;
  t.header = {"cell", "replicate", "dgp", "outcome", "n", "pve", "method",
              "failed", "error", "tp", "fp", "f1", "rmse_x1", "rmse_x2",
              "ate_rmse", "n_subgroups"};
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) {
    return v ? num(*v) : std::string();
  };
  for (const StudyRow& r : rows) {
    t.rows.push_back({std::to_string(r.cell), std::to_string(r.replicate), r.dgp,
                      r.outcome, std::to_string(r.n), num(r.pve), r.method,
                      r.failed ? "1" : "0", r.error, std::to_string(r.tp),
                      std::to_string(r.fp), num(r.f1), opt(r.rmse_x1),
                      opt(r.rmse_x2), opt(r.ate_rmse),
                      std::to_string(r.n_subgroups)});
  }
  return write_csv(t);
}

}  // namespace cdt

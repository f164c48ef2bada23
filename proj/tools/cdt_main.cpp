#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdt/csv.hpp"
#include "cdt/errors.hpp"
#include "cdt/pipeline.hpp"
#include "cdt/report_io.hpp"
#include "cdt/simulation.hpp"
#include "cdt/stability.hpp"

namespace {

using namespace cdt;

constexpr int kExitData = 2;
constexpr int kExitEstimation = 3;

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Flags shared by the commands that ingest a CSV.
struct DataFlags {
  std::string path, outcome, treatment, covariates, id;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", path, "input CSV with a header row")->required();
    cmd->add_option("--outcome", outcome, "outcome column")->required();
    cmd->add_option("--treatment", treatment, "0/1 treatment column")->required();
    cmd->add_option("--covariates", covariates,
                    "comma list of covariate columns (default: all others)");
    cmd->add_option("--id", id, "unit label column, excluded from covariates");
  }

  Dataset load() const {
    const CsvTable table = read_csv_file(path);
    std::vector<std::string> cov = split_list(covariates);
    return dataset_from_csv(table, outcome, treatment,
                            covariates.empty() ? nullptr : &cov,
                            id.empty() ? nullptr : &id);
  }
};

struct TeacherFlags {
  std::size_t trees = 500;
  std::size_t rounds = 200;
  std::size_t repeats = 50;

  void attach(CLI::App* cmd) {
    cmd->add_option("--trees", trees, "forest size for t-forest and noise");
    cmd->add_option("--rounds", rounds, "boosting rounds for s-gbt and r-gbt");
    cmd->add_option("--cross-fit-repeats", repeats, "half-sample repeats for r-gbt");
  }

  void apply(TeacherSpec* spec) const {
    spec->forest.n_trees = trees;
    spec->gbt.n_rounds = rounds;
    spec->cross_fit_repeats = repeats;
  }
};

PruneMode parse_prune(const std::string& text, std::size_t* depth) {
  if (text == "cv") return PruneMode::Cv;
  if (text == "none") return PruneMode::None;
  if (text.rfind("depth=", 0) == 0) {
    const std::string k = text.substr(6);
    try {
      std::size_t pos = 0;
      const unsigned long v = std::stoul(k, &pos);
      if (pos != k.size() || v < 1) throw DataError("bad pruning depth '" + k + "'");
      *depth = v;
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError("bad pruning depth '" + k + "'");
    }
    return PruneMode::Depth;
  }
  throw DataError("unknown pruning mode '" + text + "' (cv, depth=K, none)");
}

PropensityConfig parse_propensity(const std::string& text) {
  PropensityConfig p;
  if (text == "estimate") {
    p.estimate = true;
    return p;
  }
  if (text.rfind("known=", 0) == 0) {
    const std::string v = text.substr(6);
    try {
      p.known_e = parse_number(v, 0, "propensity");
    } catch (const DataError&) {
      throw DataError("bad propensity value '" + v + "'");
    }
    if (!(p.known_e > 0.0 && p.known_e < 1.0))
      throw DataError("propensity must lie strictly inside (0, 1)");
    return p;
  }
  throw DataError("unknown propensity form '" + text + "' (known=E or estimate)");
}

int cmd_fit(const DataFlags& data, const TeacherFlags& tflags,
            const std::string& teacher, double pi_train, const std::string& prune,
            const std::string& propensity, bool dr, const std::string& het,
            std::size_t min_leaf, std::size_t min_split, double complexity,
            std::uint64_t seed, std::size_t threads, const std::string& out) {
  CdtConfig cfg;
  cfg.teacher.kind = teacher_from_name(teacher);
  if (cfg.teacher.kind == TeacherKind::Noise)
    throw DataError("the noise teacher is a selection control, not a fit option");
  tflags.apply(&cfg.teacher);
  cfg.pi_train = pi_train;
  cfg.prune = parse_prune(prune, &cfg.prune_depth);
  cfg.use_dr = dr;
  cfg.est_propensity = parse_propensity(propensity);
  cfg.teacher.propensity = cfg.est_propensity;
  if (het == "cochran-q")
    cfg.het_variant = HetVariant::CochranQ;
  else if (het == "projection")
    cfg.het_variant = HetVariant::Projection;
  else
    throw DataError("unknown heterogeneity test '" + het + "'");
  cfg.student.min_leaf = min_leaf;
  cfg.student.min_split = min_split;
  cfg.student.complexity = complexity;
  cfg.threads = threads;

  const Dataset ds = data.load();
  const CdtReport rep = run_cdt(ds, cfg, seed);
  write_report_file(out, rep);
  std::cout << render_report(rep);
  std::cerr << "report written to " << out << "\n";
  return 0;
}

int cmd_select_teacher(const DataFlags& data, const TeacherFlags& tflags,
                       const std::string& teachers, const std::string& depths,
                       std::size_t bootstraps, std::size_t min_leaf,
                       std::size_t min_split, double complexity,
                       std::uint64_t seed, std::size_t threads,
                       const std::string& out_csv, const std::string& out_json) {
  StabilityParams params;
  for (const std::string& name : split_list(teachers)) {
    TeacherSpec spec;
    spec.kind = teacher_from_name(name);
    tflags.apply(&spec);
    params.teachers.push_back(spec);
  }
  params.depths.clear();
  for (const std::string& d : split_list(depths)) {
    try {
      std::size_t pos = 0;
      const unsigned long v = std::stoul(d, &pos);
      if (pos != d.size()) throw DataError("bad depth '" + d + "'");
      params.depths.push_back(v);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError("bad depth '" + d + "'");
    }
  }
  if (params.depths.empty()) params.depths = {1, 2, 3, 4};
  params.bootstraps = bootstraps;
  params.student.min_leaf = min_leaf;
  params.student.min_split = min_split;
  params.student.complexity = complexity;
  params.seed = seed;
  params.threads = threads;

  const Dataset ds = data.load();
  const StabilityReport rep = select_teacher(ds, params);

  CsvTable long_form;
  long_form.header = {"teacher", "depth", "bootstrap", "ssi", "short_trees"};
  for (const TeacherStability& t : rep.teachers)
    for (std::size_t di = 0; di < rep.depths.size(); ++di)
      for (std::size_t b = 0; b < t.ssi[di].size(); ++b)
        long_form.rows.push_back({t.name, std::to_string(rep.depths[di]),
                                  std::to_string(b), num(t.ssi[di][b]),
                                  t.flagged[di][b] ? "1" : "0"});
  write_csv_file(out_csv, long_form);

  std::ofstream js(out_json, std::ios::binary);
  if (!js) throw DataError("cannot write " + out_json);
  js << stability_to_json(rep);

  std::cout << render_stability(rep);
  std::cerr << "per-bootstrap agreement written to " << out_csv
            << ", summary to " << out_json << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& dgp,
                 const std::string& outcome, std::size_t n, std::size_t p,
                 double pve, std::size_t reps, const std::string& methods,
                 std::size_t mc_n, std::uint64_t seed, std::size_t threads,
                 const std::string& out, const std::string& out_summary) {
  StudyConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw DataError("cannot open " + config_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    cfg = study_config_from_json(buf.str());
  } else {
    DgpConfig cell;
    cell.dgp = dgp_from_name(dgp);
    cell.outcome = outcome_from_name(outcome);
    cell.n = n;
    cell.p = p;
    cell.pve = pve;  // validated by the generator
    pve_to_sigma(cell.dgp, pve);
    cfg.cells = {cell};
    for (const std::string& m : split_list(methods))
      cfg.methods.push_back(study_method(m));
    if (cfg.methods.empty()) throw DataError("no methods requested");
    cfg.replicates = reps;
    cfg.mc_n = mc_n;
  }
  cfg.seed = seed;
  cfg.threads = threads;

  const std::vector<StudyRow> rows = run_replicates(cfg);
  {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw DataError("cannot write " + out);
    f << study_csv(rows);
  }
  const std::vector<StudySummary> sums = aggregate_study(rows);
  {
    std::ofstream f(out_summary, std::ios::binary);
    if (!f) throw DataError("cannot write " + out_summary);
    f << summary_csv(sums);
  }

  std::size_t failures = 0;
  for (const StudyRow& r : rows)
    if (r.failed) ++failures;
  std::cout << rows.size() << " runs (" << failures << " failed) across "
            << cfg.cells.size() << " cells; metrics in " << out
            << ", means in " << out_summary << "\n";
  return 0;
}

int cmd_diagnose(const std::string& path, const std::string& out_csv) {
  const CdtReport rep = read_report_file(path);
  std::cout << "method " << rep.method << ", seed " << rep.seed << ", n " << rep.n
            << ", p " << rep.p << "\n";
  std::cout << "split: train " << rep.counts.n_train << " ("
            << rep.counts.train_treated << "/" << rep.counts.train_control
            << "), estimation " << rep.counts.n_est << " ("
            << rep.counts.est_treated << "/" << rep.counts.est_control << ")\n";
  std::cout << "student vs teacher rmse: " << num(rep.student_rmse) << "\n";
  if (rep.teacher_oob_fallbacks > 0)
    std::cout << "teacher out-of-bag fallbacks: " << rep.teacher_oob_fallbacks
              << "\n";

  std::cout << "\nsubgroup arms:\n";
  std::vector<std::string> undefined;
  for (const SubgroupEstimate& g : rep.subgroups) {
    std::cout << "  " << g.label << ": treated " << g.n_treated << ", control "
              << g.n_control;
    if (g.n_treated < 2 || g.n_control < 2) std::cout << "  [warning: thin arm]";
    std::cout << "\n";
    if (!g.tau) undefined.push_back(g.label);
  }
  if (!undefined.empty()) {
    std::cout << "undefined estimates:\n";
    for (const std::string& label : undefined) std::cout << "  " << label << "\n";
  }

  if (!rep.nodes.empty()) {
    std::cout << "\nteacher effect quantiles per subgroup "
                 "(min / q25 / median / q75 / max):\n";
    for (const NodeDiagnostic& d : rep.nodes)
      std::cout << "  " << d.label << ": " << num(d.tau_min) << " / "
                << num(d.tau_q25) << " / " << num(d.tau_median) << " / "
                << num(d.tau_q75) << " / " << num(d.tau_max) << "\n";
  }
  for (const std::string& w : rep.warnings) std::cout << "warning: " << w << "\n";

  if (!out_csv.empty()) {
    CsvTable t;
    t.header = {"label", "n", "n_treated", "n_control", "tau_min", "tau_q25",
                "tau_median", "tau_q75", "tau_max"};
    for (const NodeDiagnostic& d : rep.nodes)
      t.rows.push_back({d.label, std::to_string(d.n), std::to_string(d.n_treated),
                        std::to_string(d.n_control), num(d.tau_min), num(d.tau_q25),
                        num(d.tau_median), num(d.tau_q75), num(d.tau_max)});
    write_csv_file(out_csv, t);
    std::cerr << "node diagnostics written to " << out_csv << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subgroup discovery for randomized experiments by teacher "
               "distillation into honest decision trees"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::size_t threads = 0;

  // fit ---------------------------------------------------------------
  CLI::App* fit = app.add_subcommand("fit", "fit subgroups on an experiment CSV");
  DataFlags fit_data;
  fit_data.attach(fit);
  TeacherFlags fit_teacher;
  fit_teacher.attach(fit);
  std::string teacher = "t-forest";
  fit->add_option("--teacher", teacher, "t-forest, s-gbt, or r-gbt");
  double pi_train = 0.70;
  fit->add_option("--pi-train", pi_train, "training share of the honest split");
  std::string prune = "cv";
  fit->add_option("--prune", prune, "cv, depth=K, or none");
  std::string propensity = "known=0.5";
  fit->add_option("--propensity", propensity, "known=E or estimate");
  bool dr = false;
  fit->add_flag("--dr", dr, "add covariate-adjusted weighted estimates");
  std::string het = "cochran-q";
  fit->add_option("--het", het, "cochran-q or projection");
  std::size_t min_leaf = 7, min_split = 20;
  double complexity = 0.01;
  fit->add_option("--min-leaf", min_leaf, "smallest training leaf");
  fit->add_option("--min-split", min_split, "smallest splittable node");
  fit->add_option("--complexity", complexity,
                  "fraction of root SSE a split must recover");
  std::string fit_out = "report.json";
  fit->add_option("--out", fit_out, "report destination");
  fit->add_option("--seed", seed, "master seed");
  fit->add_option("--threads", threads, "worker cap, 0 = all cores")
      ->envname("CDT_THREADS");

  // select-teacher ----------------------------------------------------
  CLI::App* sel = app.add_subcommand(
      "select-teacher", "rank teachers by bootstrap partition stability");
  DataFlags sel_data;
  sel_data.attach(sel);
  TeacherFlags sel_teacher;
  sel_teacher.attach(sel);
  std::string teachers = "t-forest,s-gbt,r-gbt,noise";
  sel->add_option("--teachers", teachers, "comma list of candidates");
  std::string depths = "1,2,3,4";
  sel->add_option("--depths", depths, "comma list of pruning depths");
  std::size_t bootstraps = 100;
  sel->add_option("--bootstraps", bootstraps, "bootstrap pairs per teacher");
  std::size_t sel_min_leaf = 7, sel_min_split = 20;
  double sel_complexity = 0.01;
  sel->add_option("--min-leaf", sel_min_leaf, "smallest training leaf");
  sel->add_option("--min-split", sel_min_split, "smallest splittable node");
  sel->add_option("--complexity", sel_complexity,
                  "fraction of root SSE a split must recover");
  std::string out_csv = "ssi.csv", out_json = "teacher_selection.json";
  sel->add_option("--out-csv", out_csv, "per-bootstrap agreement rows");
  sel->add_option("--out-json", out_json, "summary with the recommendation");
  sel->add_option("--seed", seed, "master seed");
  sel->add_option("--threads", threads, "worker cap, 0 = all cores")
      ->envname("CDT_THREADS");

  // simulate ----------------------------------------------------------
  CLI::App* sim = app.add_subcommand("simulate", "run a synthetic study grid");
  std::string config_path;
  CLI::Option* config_opt =
      sim->add_option("--config", config_path, "study grid as a JSON file");
  std::string dgp = "and", outcome_model = "effect-only";
  std::size_t sim_n = 500, sim_p = 10, reps = 20, mc_n = 100000;
  double pve = 1.0;
  std::string methods = "baseline,cdt-t-forest";
  sim->add_option("--dgp", dgp, "and, additive, or or")->excludes(config_opt);
  sim->add_option("--outcome-model", outcome_model,
                  "effect-only or linear-covariates")
      ->excludes(config_opt);
  sim->add_option("--n", sim_n, "rows per replicate")->excludes(config_opt);
  sim->add_option("--p", sim_p, "covariate count")->excludes(config_opt);
  sim->add_option("--pve", pve, "share of effect variance explained")
      ->excludes(config_opt);
  sim->add_option("--reps", reps, "replicates per cell")->excludes(config_opt);
  sim->add_option("--methods", methods, "comma list, e.g. baseline,cdt-tforest")
      ->excludes(config_opt);
  sim->add_option("--mc-n", mc_n, "draws for true-effect integration, 0 skips")
      ->excludes(config_opt);
  std::string sim_out = "study.csv", sim_summary = "study_summary.csv";
  sim->add_option("--out", sim_out, "per-replicate metric rows");
  sim->add_option("--out-summary", sim_summary, "mean and SE per cell and method");
  sim->add_option("--seed", seed, "master seed");
  sim->add_option("--threads", threads, "worker cap, 0 = all cores")
      ->envname("CDT_THREADS");

  // diagnose ----------------------------------------------------------
  CLI::App* diag = app.add_subcommand("diagnose", "inspect a written report");
  std::string report_path;
  diag->add_option("report", report_path, "report file from fit")->required();
  std::string diag_csv;
  diag->add_option("--out-csv", diag_csv, "also write node quantiles as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitData;
  }

  try {
    if (app.got_subcommand(fit))
      return cmd_fit(fit_data, fit_teacher, teacher, pi_train, prune, propensity,
                     dr, het, min_leaf, min_split, complexity, seed, threads,
                     fit_out);
    if (app.got_subcommand(sel))
      return cmd_select_teacher(sel_data, sel_teacher, teachers, depths,
                                bootstraps, sel_min_leaf, sel_min_split,
                                sel_complexity, seed, threads, out_csv, out_json);
    if (app.got_subcommand(sim))
      return cmd_simulate(config_path, dgp, outcome_model, sim_n, sim_p, pve,
                          reps, methods, mc_n, seed, threads, sim_out,
                          sim_summary);
    if (app.got_subcommand(diag)) return cmd_diagnose(report_path, diag_csv);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  }
  return 0;
}

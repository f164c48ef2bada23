#include "cdt/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

using njson = nlohmann::ordered_json;

std::string fmt_double(double v) {
  if (!std::isfinite(v)) throw DataError("non-finite number in a report");
  if (v == 0.0) return "0";  // squash the sign of negative zero
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// nlohmann's dump() picks the shortest float spelling per value; reports
// instead fix 17 significant digits everywhere, so serialization walks the
// tree itself. Key order is insertion order throughout.
void dump_value(const njson& j, std::string& out, int indent) {
  switch (j.type()) {
    case njson::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t k = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++k) {
        out.append(indent + 2, ' ');
        out += njson(it.key()).dump();
        out += ": ";
        dump_value(it.value(), out, indent + 2);
        if (k + 1 < j.size()) out += ',';
        out += '\n';
      }
      out.append(indent, ' ');
      out += '}';
      return;
    }
    case njson::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < j.size(); ++k) {
        out.append(indent + 2, ' ');
        dump_value(j[k], out, indent + 2);
        if (k + 1 < j.size()) out += ',';
        out += '\n';
      }
      out.append(indent, ' ');
      out += ']';
      return;
    }
    case njson::value_t::string:
      out += j.dump();
      return;
    case njson::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      return;
    case njson::value_t::number_integer:
      out += std::to_string(j.get<long long>());
      return;
    case njson::value_t::number_unsigned:
      out += std::to_string(j.get<unsigned long long>());
      return;
    case njson::value_t::number_float:
      out += fmt_double(j.get<double>());
      return;
    default:
      out += "null";
      return;
  }
}

std::string dump_document(const njson& j) {
  std::string out;
  dump_value(j, out, 0);
  out += '\n';
  return out;
}

const char* prune_name(PruneMode m) {
  switch (m) {
    case PruneMode::Cv: return "cv";
    case PruneMode::Depth: return "depth";
    case PruneMode::None: return "none";
  }
  return "cv";
}

PruneMode prune_from_name(const std::string& s) {
  if (s == "cv") return PruneMode::Cv;
  if (s == "depth") return PruneMode::Depth;
  if (s == "none") return PruneMode::None;
  throw DataError("unknown pruning mode '" + s + "'");
}

const char* het_name(HetVariant v) {
  return v == HetVariant::CochranQ ? "cochran-q" : "projection";
}

HetVariant het_from_name(const std::string& s) {
  if (s == "cochran-q") return HetVariant::CochranQ;
  if (s == "projection") return HetVariant::Projection;
  throw DataError("unknown heterogeneity test '" + s + "'");
}

njson propensity_json(const PropensityConfig& p) {
  njson o;
  o["estimate"] = p.estimate;
  o["known_e"] = p.known_e;
  return o;
}

PropensityConfig propensity_from(const njson& o) {
  PropensityConfig p;
  p.estimate = o.at("estimate").get<bool>();
  p.known_e = o.at("known_e").get<double>();
  return p;
}

njson config_json(const CdtConfig& c) {
  njson forest;
  forest["n_trees"] = c.teacher.forest.n_trees;
  forest["mtry"] = c.teacher.forest.mtry;
  forest["sample_fraction"] = c.teacher.forest.sample_fraction;
  forest["honest"] = c.teacher.forest.honest;
  forest["min_leaf"] = c.teacher.forest.tree.min_leaf;
  forest["min_split"] = c.teacher.forest.tree.min_split;
  forest["max_depth"] = c.teacher.forest.tree.max_depth;

  njson gbt;
  gbt["n_rounds"] = c.teacher.gbt.n_rounds;
  gbt["learning_rate"] = c.teacher.gbt.learning_rate;
  gbt["max_depth"] = c.teacher.gbt.max_depth;
  gbt["subsample"] = c.teacher.gbt.subsample;

  njson teacher;
  teacher["name"] = teacher_name(c.teacher.kind);
  teacher["forest"] = forest;
  teacher["gbt"] = gbt;
  teacher["cross_fit_repeats"] = c.teacher.cross_fit_repeats;
  teacher["propensity"] = propensity_json(c.teacher.propensity);

  njson student;
  student["min_leaf"] = c.student.min_leaf;
  student["min_split"] = c.student.min_split;
  student["max_depth"] = c.student.max_depth;
  student["min_loss_decrease"] = c.student.min_loss_decrease;
  student["complexity"] = c.student.complexity;
  student["max_thresholds"] = c.student.max_thresholds;

  njson o;
  o["pi_train"] = c.pi_train;
  o["teacher"] = teacher;
  o["student"] = student;
  o["prune"] = prune_name(c.prune);
  o["prune_depth"] = c.prune_depth;
  o["cv_folds"] = c.cv_folds;
  o["het_variant"] = het_name(c.het_variant);
  o["use_dr"] = c.use_dr;
  o["est_propensity"] = propensity_json(c.est_propensity);
  return o;
}

void check_keys(const njson& o, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw DataError(where + ": unknown field '" + it.key() + "'");
  }
}

CdtConfig config_from(const njson& o, bool strict) {
  CdtConfig c;
  if (strict) {
    check_keys(o,
               {"pi_train", "teacher", "student", "prune", "prune_depth",
                "cv_folds", "het_variant", "use_dr", "est_propensity"},
               "pipeline");
    if (o.contains("teacher"))
      check_keys(o["teacher"],
                 {"name", "forest", "gbt", "cross_fit_repeats", "propensity"},
                 "pipeline.teacher");
    if (o.contains("teacher") && o["teacher"].contains("forest"))
      check_keys(o["teacher"]["forest"],
                 {"n_trees", "mtry", "sample_fraction", "honest", "min_leaf",
                  "min_split", "max_depth"},
                 "pipeline.teacher.forest");
    if (o.contains("teacher") && o["teacher"].contains("gbt"))
      check_keys(o["teacher"]["gbt"],
                 {"n_rounds", "learning_rate", "max_depth", "subsample"},
                 "pipeline.teacher.gbt");
    if (o.contains("student"))
      check_keys(o["student"],
                 {"min_leaf", "min_split", "max_depth", "min_loss_decrease",
                  "complexity", "max_thresholds"},
                 "pipeline.student");
  }
  if (o.contains("pi_train")) c.pi_train = o["pi_train"].get<double>();
  if (o.contains("teacher")) {
    const njson& t = o["teacher"];
    if (t.contains("name")) c.teacher.kind = teacher_from_name(t["name"].get<std::string>());
    if (t.contains("forest")) {
      const njson& f = t["forest"];
      if (f.contains("n_trees")) c.teacher.forest.n_trees = f["n_trees"].get<std::size_t>();
      if (f.contains("mtry")) c.teacher.forest.mtry = f["mtry"].get<std::size_t>();
      if (f.contains("sample_fraction"))
        c.teacher.forest.sample_fraction = f["sample_fraction"].get<double>();
      if (f.contains("honest")) c.teacher.forest.honest = f["honest"].get<bool>();
      if (f.contains("min_leaf")) c.teacher.forest.tree.min_leaf = f["min_leaf"].get<std::size_t>();
      if (f.contains("min_split")) c.teacher.forest.tree.min_split = f["min_split"].get<std::size_t>();
      if (f.contains("max_depth")) c.teacher.forest.tree.max_depth = f["max_depth"].get<std::size_t>();
    }
    if (t.contains("gbt")) {
      const njson& g = t["gbt"];
      if (g.contains("n_rounds")) c.teacher.gbt.n_rounds = g["n_rounds"].get<std::size_t>();
      if (g.contains("learning_rate")) c.teacher.gbt.learning_rate = g["learning_rate"].get<double>();
      if (g.contains("max_depth")) c.teacher.gbt.max_depth = g["max_depth"].get<std::size_t>();
      if (g.contains("subsample")) c.teacher.gbt.subsample = g["subsample"].get<double>();
    }
    if (t.contains("cross_fit_repeats"))
      c.teacher.cross_fit_repeats = t["cross_fit_repeats"].get<std::size_t>();
    if (t.contains("propensity")) c.teacher.propensity = propensity_from(t["propensity"]);
  }
  if (o.contains("student")) {
    const njson& s = o["student"];
    if (s.contains("min_leaf")) c.student.min_leaf = s["min_leaf"].get<std::size_t>();
    if (s.contains("min_split")) c.student.min_split = s["min_split"].get<std::size_t>();
    if (s.contains("max_depth")) c.student.max_depth = s["max_depth"].get<std::size_t>();
    if (s.contains("min_loss_decrease"))
      c.student.min_loss_decrease = s["min_loss_decrease"].get<double>();
    if (s.contains("complexity")) c.student.complexity = s["complexity"].get<double>();
    if (s.contains("max_thresholds"))
      c.student.max_thresholds = s["max_thresholds"].get<std::size_t>();
  }
  if (o.contains("prune")) c.prune = prune_from_name(o["prune"].get<std::string>());
  if (o.contains("prune_depth")) c.prune_depth = o["prune_depth"].get<std::size_t>();
  if (o.contains("cv_folds")) c.cv_folds = o["cv_folds"].get<std::size_t>();
  if (o.contains("het_variant"))
    c.het_variant = het_from_name(o["het_variant"].get<std::string>());
  if (o.contains("use_dr")) c.use_dr = o["use_dr"].get<bool>();
  if (o.contains("est_propensity")) c.est_propensity = propensity_from(o["est_propensity"]);
  return c;
}

njson node_json(const RegressionTree& t, int i) {
  const TreeNode& nd = t.nodes[static_cast<std::size_t>(i)];
  njson o;
  if (!nd.is_leaf()) {
    njson rule;
    rule["feature"] = nd.feature;
    rule["threshold"] = nd.threshold;
    o["rule"] = rule;
    o["decrease"] = nd.decrease;
  }
  o["mean"] = nd.mean;
  o["count"] = nd.count;
  if (!nd.is_leaf()) {
    o["left"] = node_json(t, nd.left);
    o["right"] = node_json(t, nd.right);
  }
  return o;
}

int node_from(const njson& o, RegressionTree& t, int depth) {
  const int idx = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  {
    TreeNode& nd = t.nodes.back();
    nd.depth = depth;
    nd.mean = o.at("mean").get<double>();
    nd.count = o.at("count").get<std::size_t>();
    nd.weight = static_cast<double>(nd.count);
  }
  if (o.contains("rule")) {
    const njson& rule = o.at("rule");
    const std::size_t feature = rule.at("feature").get<std::size_t>();
    const double threshold = rule.at("threshold").get<double>();
    const double decrease = o.at("decrease").get<double>();
    const int left = node_from(o.at("left"), t, depth + 1);
    const int right = node_from(o.at("right"), t, depth + 1);
    TreeNode& nd = t.nodes[static_cast<std::size_t>(idx)];
    nd.feature = feature;
    nd.threshold = threshold;
    nd.decrease = decrease;
    nd.left = left;
    nd.right = right;
  }
  return idx;
}

njson optional_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::optional<double> optional_from(const njson& o, const char* key) {
  const njson& v = o.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

const char* rule_op_name(RuleOp op) { return op == RuleOp::LE ? "le" : "gt"; }

RuleOp rule_op_from(const std::string& s) {
  if (s == "le") return RuleOp::LE;
  if (s == "gt") return RuleOp::GT;
  throw DataError("unknown rule operator '" + s + "'");
}

njson rules_json(const Subgroup& g) {
  njson arr = njson::array();
  for (const Rule& r : g.rules) {
    njson o;
    o["feature"] = r.feature;
    o["op"] = rule_op_name(r.op);
    o["threshold"] = r.threshold;
    arr.push_back(o);
  }
  return arr;
}

Subgroup rules_from(const njson& arr) {
  Subgroup g;
  for (const njson& o : arr) {
    Rule r;
    r.feature = o.at("feature").get<std::size_t>();
    r.op = rule_op_from(o.at("op").get<std::string>());
    r.threshold = o.at("threshold").get<double>();
    g.rules.push_back(r);
  }
  return g;
}

njson report_json(const CdtReport& rep) {
  njson o;
  o["schema_version"] = kReportSchemaVersion;
  o["method"] = rep.method;
  o["seed"] = rep.seed;
  o["config"] = config_json(rep.config);
  o["n"] = rep.n;
  o["p"] = rep.p;
  o["columns"] = rep.columns;

  njson counts;
  counts["train"] = rep.counts.n_train;
  counts["est"] = rep.counts.n_est;
  counts["train_treated"] = rep.counts.train_treated;
  counts["train_control"] = rep.counts.train_control;
  counts["est_treated"] = rep.counts.est_treated;
  counts["est_control"] = rep.counts.est_control;
  o["counts"] = counts;

  o["chosen_alpha"] = optional_json(rep.chosen_alpha);
  o["tree"] = rep.tree.empty() ? njson(nullptr) : node_json(rep.tree, 0);

  njson groups = njson::array();
  for (const SubgroupEstimate& g : rep.subgroups) {
    njson e;
    e["label"] = g.label;
    e["rules"] = rules_json(g.rules);
    e["n_g"] = g.n;
    e["n_g1"] = g.n_treated;
    e["n_g0"] = g.n_control;
    e["tau_hat"] = optional_json(g.tau);
    e["se"] = optional_json(g.se);
    e["undefined"] = !g.tau.has_value();
    e["dr_tau"] = optional_json(g.dr_tau);
    e["dr_se"] = optional_json(g.dr_se);
    groups.push_back(e);
  }
  o["subgroups"] = groups;

  o["overall_tau"] = optional_json(rep.overall_tau);

  njson het;
  het["skipped"] = rep.het.skipped;
  het["reason"] = rep.het.reason;
  het["variant"] = het_name(rep.het.variant);
  het["statistic"] = rep.het.statistic;
  het["df"] = rep.het.df;
  het["p_value"] = rep.het.p_value;
  o["heterogeneity"] = het;

  o["student_rmse"] = rep.student_rmse;
  o["teacher_oob_fallbacks"] = rep.teacher_oob_fallbacks;

  njson diag = njson::array();
  for (const NodeDiagnostic& d : rep.nodes) {
    njson e;
    e["label"] = d.label;
    e["n"] = d.n;
    e["n_treated"] = d.n_treated;
    e["n_control"] = d.n_control;
    e["tau_min"] = d.tau_min;
    e["tau_q25"] = d.tau_q25;
    e["tau_median"] = d.tau_median;
    e["tau_q75"] = d.tau_q75;
    e["tau_max"] = d.tau_max;
    diag.push_back(e);
  }
  o["diagnostics"] = diag;
  o["warnings"] = rep.warnings;
  return o;
}

}  // namespace

std::string report_to_json(const CdtReport& report) {
  return dump_document(report_json(report));
}

CdtReport report_from_json(const std::string& text) {
  njson o;
  try {
    o = njson::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("report parse: ") + e.what());
  }
  try {
    if (!o.is_object() || !o.contains("schema_version"))
      throw DataError("not a report document (no schema_version)");
    if (o["schema_version"] != kReportSchemaVersion)
      throw DataError("unsupported report schema version " + o["schema_version"].dump());

    CdtReport rep;
    rep.method = o.at("method").get<std::string>();
    rep.seed = o.at("seed").get<std::uint64_t>();
    rep.config = config_from(o.at("config"), false);
    rep.n = o.at("n").get<std::size_t>();
    rep.p = o.at("p").get<std::size_t>();
    rep.columns = o.at("columns").get<std::vector<std::string>>();

    const njson& counts = o.at("counts");
    rep.counts.n_train = counts.at("train").get<std::size_t>();
    rep.counts.n_est = counts.at("est").get<std::size_t>();
    rep.counts.train_treated = counts.at("train_treated").get<std::size_t>();
    rep.counts.train_control = counts.at("train_control").get<std::size_t>();
    rep.counts.est_treated = counts.at("est_treated").get<std::size_t>();
    rep.counts.est_control = counts.at("est_control").get<std::size_t>();

    rep.chosen_alpha = optional_from(o, "chosen_alpha");
    rep.tree.p = rep.p;
    if (!o.at("tree").is_null()) node_from(o.at("tree"), rep.tree, 0);

    rep.partition.p = rep.p;
    for (const njson& e : o.at("subgroups")) {
      SubgroupEstimate g;
      g.label = e.at("label").get<std::string>();
      g.rules = rules_from(e.at("rules"));
      g.n = e.at("n_g").get<std::size_t>();
      g.n_treated = e.at("n_g1").get<std::size_t>();
      g.n_control = e.at("n_g0").get<std::size_t>();
      g.tau = optional_from(e, "tau_hat");
      g.se = optional_from(e, "se");
      g.dr_tau = optional_from(e, "dr_tau");
      g.dr_se = optional_from(e, "dr_se");
      rep.partition.groups.push_back(g.rules);
      rep.subgroups.push_back(std::move(g));
    }

    rep.overall_tau = optional_from(o, "overall_tau");

    const njson& het = o.at("heterogeneity");
    rep.het.skipped = het.at("skipped").get<bool>();
    rep.het.reason = het.at("reason").get<std::string>();
    rep.het.variant = het_from_name(het.at("variant").get<std::string>());
    rep.het.statistic = het.at("statistic").get<double>();
    rep.het.df = het.at("df").get<double>();
    rep.het.p_value = het.at("p_value").get<double>();

    rep.student_rmse = o.at("student_rmse").get<double>();
    rep.teacher_oob_fallbacks = o.at("teacher_oob_fallbacks").get<std::size_t>();

    for (const njson& e : o.at("diagnostics")) {
      NodeDiagnostic d;
      d.label = e.at("label").get<std::string>();
      d.n = e.at("n").get<std::size_t>();
      d.n_treated = e.at("n_treated").get<std::size_t>();
      d.n_control = e.at("n_control").get<std::size_t>();
      d.tau_min = e.at("tau_min").get<double>();
      d.tau_q25 = e.at("tau_q25").get<double>();
      d.tau_median = e.at("tau_median").get<double>();
      d.tau_q75 = e.at("tau_q75").get<double>();
      d.tau_max = e.at("tau_max").get<double>();
      rep.nodes.push_back(std::move(d));
    }
    rep.warnings = o.at("warnings").get<std::vector<std::string>>();
    return rep;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("report parse: ") + e.what());
  }
}

void write_report_file(const std::string& path, const CdtReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << report_to_json(report);
}

CdtReport read_report_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

std::string stability_to_json(const StabilityReport& report) {
  njson o;
  o["schema_version"] = kReportSchemaVersion;
  o["depths"] = report.depths;
  o["bootstraps"] = report.bootstraps;
  o["recommended"] = report.teachers.empty()
                         ? njson(nullptr)
                         : njson(report.teachers[report.recommended].name);

  njson teachers = njson::array();
  for (const TeacherStability& t : report.teachers) {
    njson e;
    e["name"] = t.name;
    e["mean_overall"] = t.mean_overall;
    njson by_depth = njson::array();
    for (std::size_t di = 0; di < report.depths.size(); ++di) {
      njson d;
      d["depth"] = report.depths[di];
      d["mean_ssi"] = t.mean_by_depth[di];
      d["se"] = t.se_by_depth[di];
      d["short_tree_rate"] = t.flag_rate_by_depth[di];
      njson freq;
      for (std::size_t f = 0; f < report.columns.size(); ++f)
        freq[report.columns[f]] = t.feature_frequency[di][f];
      d["feature_frequency"] = freq;
      by_depth.push_back(d);
    }
    e["by_depth"] = by_depth;
    teachers.push_back(e);
  }
  o["teachers"] = teachers;
  return dump_document(o);
}

StudyConfig study_config_from_json(const std::string& text) {
  njson o;
  try {
    o = njson::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("config parse: ") + e.what());
  }
  try {
    if (!o.is_object()) throw DataError("config must be a JSON object");
    check_keys(o,
               {"schema_version", "cells", "methods", "replicates", "pipeline",
                "mc_n", "seed"},
               "config");
    if (o.contains("schema_version") && o["schema_version"] != kReportSchemaVersion)
      throw DataError("unsupported config schema version " +
                      o["schema_version"].dump());

    StudyConfig cfg;
    if (o.contains("pipeline")) cfg.pipeline = config_from(o.at("pipeline"), true);
    if (!o.contains("cells") || o.at("cells").empty())
      throw DataError("config needs at least one study cell");
    for (const njson& c : o.at("cells")) {
      check_keys(c, {"dgp", "outcome", "n", "p", "pve"}, "cell");
      DgpConfig cell;
      if (c.contains("dgp")) cell.dgp = dgp_from_name(c.at("dgp").get<std::string>());
      if (c.contains("outcome"))
        cell.outcome = outcome_from_name(c.at("outcome").get<std::string>());
      if (c.contains("n")) cell.n = c.at("n").get<std::size_t>();
      if (c.contains("p")) cell.p = c.at("p").get<std::size_t>();
      if (c.contains("pve")) cell.pve = c.at("pve").get<double>();
      cfg.cells.push_back(cell);
    }
    if (!o.contains("methods") || o.at("methods").empty())
      throw DataError("config needs at least one method");
    for (const njson& m : o.at("methods")) {
      StudyMethod method = study_method(m.get<std::string>());
      if (!method.baseline) {
        // One shared teacher-parameter block; an entry only picks the kind.
        const TeacherKind kind = method.teacher.kind;
        method.teacher = cfg.pipeline.teacher;
        method.teacher.kind = kind;
      }
      cfg.methods.push_back(std::move(method));
    }
    if (o.contains("replicates")) cfg.replicates = o.at("replicates").get<std::size_t>();
    if (o.contains("mc_n")) cfg.mc_n = o.at("mc_n").get<std::size_t>();
    if (o.contains("seed")) cfg.seed = o.at("seed").get<std::uint64_t>();
    return cfg;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("config parse: ") + e.what());
  }
}

std::string study_config_to_json(const StudyConfig& cfg) {
  njson o;
  o["schema_version"] = kReportSchemaVersion;
  njson cells = njson::array();
  for (const DgpConfig& c : cfg.cells) {
    njson e;
    e["dgp"] = dgp_name(c.dgp);
    e["outcome"] = outcome_name(c.outcome);
    e["n"] = c.n;
    e["p"] = c.p;
    e["pve"] = c.pve;
    cells.push_back(e);
  }
  o["cells"] = cells;
  njson methods = njson::array();
  for (const StudyMethod& m : cfg.methods) methods.push_back(m.name);
  o["methods"] = methods;
  o["replicates"] = cfg.replicates;
  o["pipeline"] = config_json(cfg.pipeline);
  o["mc_n"] = cfg.mc_n;
  o["seed"] = cfg.seed;
  return dump_document(o);
}

}  // namespace cdt

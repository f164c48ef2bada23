#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cdt/csv.hpp"
#include "cdt/pipeline.hpp"
#include "cdt/report_io.hpp"
#include "cdt/simulation.hpp"

using namespace cdt;

namespace {

struct RunResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      env + (env.empty() ? "" : " ") + CDT_BIN + " " + args +
      " >cli_stdout.txt 2>cli_stderr.txt";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp("cli_stdout.txt");
  r.err = slurp("cli_stderr.txt");
  return r;
}

// A seeded draw with the full effect-variance share: the right answer is a
// split on x1 at 0 and on x2 at -1/2, nothing else.
const char* fixture() {
  static bool written = false;
  if (!written) {
    DgpConfig cfg;
    cfg.dgp = Dgp::Additive;
    cfg.n = 600;
    cfg.p = 5;
    cfg.pve = 1.0;
    cfg.seed = 42;
    SimData sim = gen_dataset(cfg);
    CsvTable t;
    t.header = sim.data.columns;
    t.header.push_back("y");
    t.header.push_back("z");
    char buf[40];
    for (std::size_t i = 0; i < sim.data.n; ++i) {
      std::vector<std::string> row;
      for (std::size_t j = 0; j < sim.data.p; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", sim.data.xat(i, j));
        row.push_back(buf);
      }
      std::snprintf(buf, sizeof buf, "%.17g", sim.data.y[i]);
      row.push_back(buf);
      row.push_back(std::to_string(sim.data.z[i]));
      t.rows.push_back(std::move(row));
    }
    write_csv_file("cli_fixture.csv", t);
    written = true;
  }
  return "cli_fixture.csv";
}

const std::string kDataFlags =
    std::string("--data ") + "cli_fixture.csv" + " --outcome y --treatment z";

}  // namespace

TEST_CASE("fit recovers the two effect features from the fixture") {
  fixture();
  RunResult r = run_cli("fit " + kDataFlags +
              " --teacher t-forest --trees 150 --prune depth=2"
              " --seed 9 --out cli_fit.json");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("x1") != std::string::npos);

  CdtReport rep = read_report_file("cli_fit.json");
  CHECK(rep.method == "cdt-t-forest");
  CHECK(rep.n == 600);
  std::vector<char> used(rep.p, 0);
  for (const Subgroup& g : rep.partition.groups)
    for (const Rule& rule : g.rules) used[rule.feature] = 1;
  CHECK(used[0] == 1);
  CHECK(used[1] == 1);
  for (std::size_t j = 2; j < rep.p; ++j) CHECK(used[j] == 0);
}

TEST_CASE("identical flags produce identical report bytes") {
  fixture();
  const std::string flags = "fit " + kDataFlags +
                            " --teacher t-forest --trees 100 --seed 4"
                            " --min-leaf 30 --min-split 60";
  REQUIRE(run_cli(flags + " --out cli_a.json").code == 0);
  REQUIRE(run_cli(flags + " --out cli_b.json").code == 0);
  const std::string a = slurp("cli_a.json");
  CHECK(!a.empty());
  CHECK(a == slurp("cli_b.json"));
}

TEST_CASE("worker count does not touch the result") {
  fixture();
  const std::string flags = "fit " + kDataFlags +
                            " --teacher t-forest --trees 100 --seed 4"
                            " --min-leaf 30 --min-split 60";
  REQUIRE(run_cli(flags + " --threads 1 --out cli_t1.json").code == 0);
  REQUIRE(run_cli(flags + " --threads 3 --out cli_t3.json").code == 0);
  CHECK(slurp("cli_t1.json") == slurp("cli_t3.json"));
  // The environment default steers the same knob.
  REQUIRE(run_cli(flags + " --out cli_te.json", "CDT_THREADS=2").code == 0);
  CHECK(slurp("cli_t1.json") == slurp("cli_te.json"));
}

TEST_CASE("a non-binary treatment column exits 2 and names it") {
  CsvTable t;
  t.header = {"x1", "x2", "y", "arm"};
  t.rows = {{"0.1", "0.2", "1.0", "0"},
            {"0.3", "-0.2", "0.5", "2"},
            {"-0.1", "0.9", "0.2", "1"}};
  write_csv_file("cli_badarm.csv", t);
  RunResult r = run_cli("fit --data cli_badarm.csv --outcome y --treatment arm");
  CHECK(r.code == 2);
  CHECK(r.err.find("arm") != std::string::npos);
}

TEST_CASE("the noise teacher is not a fit option") {
  fixture();
  RunResult r = run_cli("fit " + kDataFlags + " --teacher noise --trees 30");
  CHECK(r.code == 2);
}

TEST_CASE("unknown flags exit 2") {
  RunResult r = run_cli("fit --data nope.csv --outcome y --treatment z --frob 3");
  CHECK(r.code == 2);
  r = run_cli("fit " + kDataFlags + " --prune depth=zero");
  CHECK(r.code == 2);
}

TEST_CASE("teacher selection emits one row per teacher, depth, and pair") {
  fixture();
  RunResult r = run_cli("select-teacher " + kDataFlags +
                        " --teachers t-forest,noise --depths 1,2"
                        " --bootstraps 10 --trees 60 --seed 12"
                        " --out-csv cli_ssi.csv --out-json cli_sel.json");
  REQUIRE(r.code == 0);
  CsvTable t = read_csv_file("cli_ssi.csv");
  CHECK(t.header[0] == "teacher");
  CHECK(t.rows.size() == 2 * 2 * 10);
  CHECK(r.out.find("recommended: t-forest") != std::string::npos);
  const std::string js = slurp("cli_sel.json");
  CHECK(js.find("\"recommended\": \"t-forest\"") != std::string::npos);

  // Stability runs are also worker-count independent.
  RunResult r2 = run_cli("select-teacher " + kDataFlags +
                         " --teachers t-forest,noise --depths 1,2"
                         " --bootstraps 10 --trees 60 --seed 12 --threads 3"
                         " --out-csv cli_ssi2.csv --out-json cli_sel2.json");
  REQUIRE(r2.code == 0);
  CHECK(slurp("cli_ssi.csv") == slurp("cli_ssi2.csv"));
}

TEST_CASE("one bootstrap pair is too few to compare") {
  fixture();
  RunResult r = run_cli("select-teacher " + kDataFlags + " --bootstraps 1");
  CHECK(r.code == 2);
}

TEST_CASE("simulate writes one metrics row per replicate") {
  RunResult r = run_cli(
      "simulate --dgp and --pve 1 --reps 5 --n 250 --p 5"
      " --methods cdt-tforest --trees 50 --mc-n 0 --seed 6"
      " --out cli_study.csv --out-summary cli_summary.csv");
  // --trees is not a simulate flag; the run must refuse it.
  CHECK(r.code == 2);
  r = run_cli(
      "simulate --dgp and --pve 1 --reps 5 --n 250 --p 5"
      " --methods cdt-tforest --mc-n 0 --seed 6"
      " --out cli_study.csv --out-summary cli_summary.csv");
  REQUIRE(r.code == 0);
  CsvTable t = read_csv_file("cli_study.csv");
  REQUIRE(t.rows.size() == 5);
  for (const auto& row : t.rows) CHECK(row[6] == "cdt-t-forest");
}

TEST_CASE("summary means match an independent recomputation from the rows") {
  RunResult r = run_cli(
      "simulate --dgp additive --pve 1 --reps 4 --n 300 --p 5"
      " --methods baseline --mc-n 0 --seed 8"
      " --out cli_long.csv --out-summary cli_sum.csv");
  REQUIRE(r.code == 0);
  CsvTable rows = read_csv_file("cli_long.csv");
  CsvTable sums = read_csv_file("cli_sum.csv");
  REQUIRE(sums.rows.size() == 1);

  std::map<std::string, std::size_t> rcol, scol;
  for (std::size_t i = 0; i < rows.header.size(); ++i) rcol[rows.header[i]] = i;
  for (std::size_t i = 0; i < sums.header.size(); ++i) scol[sums.header[i]] = i;

  double f1 = 0, tp = 0;
  for (const auto& row : rows.rows) {
    f1 += parse_number(row[rcol["f1"]], 0, "f1");
    tp += parse_number(row[rcol["tp"]], 0, "tp");
  }
  f1 /= rows.rows.size();
  tp /= rows.rows.size();
  CHECK(parse_number(sums.rows[0][scol["f1_mean"]], 0, "f1_mean") ==
        doctest::Approx(f1).epsilon(1e-12));
  CHECK(parse_number(sums.rows[0][scol["tp_mean"]], 0, "tp_mean") ==
        doctest::Approx(tp).epsilon(1e-12));
}

TEST_CASE("bad simulation grids exit 2") {
  CHECK(run_cli("simulate --dgp xor --reps 1").code == 2);
  CHECK(run_cli("simulate --dgp and --pve 0 --reps 1").code == 2);
  CHECK(run_cli("simulate --dgp and --pve 1.5 --reps 1").code == 2);
}

TEST_CASE("a study grid can come from a config file") {
  {
    std::ofstream f("cli_grid.json");
    f << R"({"cells": [{"dgp": "additive", "n": 200, "p": 5}],
             "methods": ["baseline"], "replicates": 2, "mc_n": 0})";
  }
  RunResult r = run_cli(
      "simulate --config cli_grid.json --seed 3"
      " --out cli_gstudy.csv --out-summary cli_gsum.csv");
  REQUIRE(r.code == 0);
  CHECK(read_csv_file("cli_gstudy.csv").rows.size() == 2);

  {
    std::ofstream f("cli_grid_bad.json");
    f << R"({"cells": [{"dgp": "additive"}], "methods": ["baseline"], "repz": 2})";
  }
  CHECK(run_cli("simulate --config cli_grid_bad.json").code == 2);
  // Grid flags and a config file cannot be mixed.
  CHECK(run_cli("simulate --config cli_grid.json --dgp and").code == 2);
}

TEST_CASE("diagnose reads a report back and flags thin arms") {
  fixture();
  REQUIRE(run_cli("fit " + kDataFlags +
                  " --teacher t-forest --trees 100 --seed 4"
                  " --min-leaf 30 --min-split 60 --out cli_d.json")
              .code == 0);
  RunResult r = run_cli("diagnose cli_d.json");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("student vs teacher rmse") != std::string::npos);
  CHECK(r.out.find("subgroup arms") != std::string::npos);

  // A hand-made report with a one-unit arm gets the warning.
  CdtReport rep;
  rep.method = "cdt-t-forest";
  rep.n = 10;
  rep.p = 2;
  rep.columns = {"x1", "x2"};
  SubgroupEstimate g;
  g.label = "x1 <= 0";
  g.n = 5;
  g.n_treated = 1;
  g.n_control = 4;
  rep.subgroups.push_back(g);
  rep.partition.p = 2;
  rep.partition.groups.push_back(Subgroup{});
  write_report_file("cli_thin.json", rep);
  r = run_cli("diagnose cli_thin.json --out-csv cli_nodes.csv");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("x1 <= 0") != std::string::npos);
  CHECK(r.out.find("[warning: thin arm]") != std::string::npos);

  // Unreadable or future-versioned reports exit 2.
  CHECK(run_cli("diagnose cli_missing.json").code == 2);
  {
    std::ofstream f("cli_future.json");
    f << R"({"schema_version": 99})";
  }
  CHECK(run_cli("diagnose cli_future.json").code == 2);
}

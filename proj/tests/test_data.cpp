#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "cdt/dataset.hpp"
#include "cdt/errors.hpp"
#include "cdt/linalg.hpp"
#include "cdt/rules.hpp"

using namespace cdt;

namespace {

Dataset tiny() {
  Dataset ds;
  ds.n = 4;
  ds.p = 2;
  ds.x = {0.0, 1.0, 0.5, 2.0, 1.0, 3.0, 1.5, 4.0};
  ds.y = {1.0, 2.0, 3.0, 4.0};
  ds.z = {0, 1, 0, 1};
  ds.columns = {"a", "b"};
  return ds;
}

}  // namespace

TEST_CASE("dataset validation flags the offending coordinate") {
  Dataset ds = tiny();
  CHECK_NOTHROW(validate_dataset(ds));

  ds.y[2] = std::nan("");
  CHECK_THROWS_WITH_AS(validate_dataset(ds), doctest::Contains("row 3"), DataError);

  ds = tiny();
  ds.x[2 * 2 + 1] = INFINITY;
  CHECK_THROWS_WITH_AS(validate_dataset(ds), doctest::Contains("column b"), DataError);

  ds = tiny();
  ds.z[1] = 2;
  CHECK_THROWS_AS(validate_dataset(ds), DataError);

  ds = tiny();
  ds.y.pop_back();
  CHECK_THROWS_AS(validate_dataset(ds), DataError);

  Dataset empty;
  CHECK_THROWS_AS(validate_dataset(empty), DataError);
}

TEST_CASE("dataset subset keeps rows in order") {
  const Dataset ds = tiny();
  const Dataset sub = ds.subset({2, 0});
  CHECK(sub.n == 2);
  CHECK(sub.xat(0, 0) == 1.0);
  CHECK(sub.xat(1, 0) == 0.0);
  CHECK(sub.y[0] == 3.0);
  CHECK(sub.z[1] == 0);
  CHECK(sub.columns == ds.columns);
}

TEST_CASE("rule boundary goes with LE") {
  const Rule le{0, RuleOp::LE, 1.5};
  const Rule gt{0, RuleOp::GT, 1.5};
  const double at = 1.5, below = 1.0, above = 2.0;
  CHECK(rule_matches(le, &at));
  CHECK(rule_matches(le, &below));
  CHECK_FALSE(rule_matches(le, &above));
  CHECK_FALSE(rule_matches(gt, &at));
  CHECK(rule_matches(gt, &above));
}

TEST_CASE("canonical subgroup keeps tightest bounds") {
  // Path: x0 <= 5, x0 <= 2, x0 > -1, x1 > 0.5
  const Subgroup g = canonical_subgroup({{0, RuleOp::LE, 5.0},
                                         {0, RuleOp::LE, 2.0},
                                         {0, RuleOp::GT, -1.0},
                                         {1, RuleOp::GT, 0.5}});
  REQUIRE(g.rules.size() == 3);
  CHECK(g.rules[0].feature == 0);
  CHECK(g.rules[0].op == RuleOp::GT);
  CHECK(g.rules[0].threshold == -1.0);
  CHECK(g.rules[1].op == RuleOp::LE);
  CHECK(g.rules[1].threshold == 2.0);
  CHECK(g.rules[2].feature == 1);
  CHECK(subgroup_label(g, {"age", "dose"}) == "age > -1 & age <= 2 & dose > 0.5");
  CHECK(subgroup_label(Subgroup{}, {"age"}) == "(all)");
}

TEST_CASE("assign maps every row to its unique group") {
  Partition part;
  part.p = 1;
  part.groups.resize(2);
  part.groups[0].rules = {{0, RuleOp::LE, 0.0}};
  part.groups[1].rules = {{0, RuleOp::GT, 0.0}};
  const double xs[4] = {-1.0, 0.0, 0.5, 3.0};
  const auto g = assign(part, xs, 4, 1);
  CHECK(g == std::vector<std::size_t>{0, 0, 1, 1});

  Partition gap;
  gap.p = 1;
  gap.groups.resize(1);
  gap.groups[0].rules = {{0, RuleOp::LE, 0.0}};
  CHECK_THROWS_AS(assign(gap, xs, 4, 1), EstimationError);
}

TEST_CASE("gram solve recovers coefficients and drops duplicates") {
  // X = [1, x] design with known solution.
  // G = [[4, 10], [10, 30]], b = G * (2, -1) = (-2, -10).
  GramSolve s = solve_gram({4, 10, 10, 30}, {-2, -10}, 2);
  CHECK(s.dropped.empty());
  CHECK(s.coef[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.coef[1] == doctest::Approx(-1.0).epsilon(1e-12));
  // inverse * G = I
  const double i00 = s.inverse[0] * 4 + s.inverse[1] * 10;
  const double i01 = s.inverse[0] * 10 + s.inverse[1] * 30;
  CHECK(i00 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(i01 == doctest::Approx(0.0).scale(1).epsilon(1e-10));

  // Third column is the sum of the first two; it must be dropped and the
  // rest still solved.
  const std::vector<double> g3 = {4, 10, 14, 10, 30, 40, 14, 40, 54};
  GramSolve s3 = solve_gram(g3, {-2, -10, -12}, 3);
  REQUIRE(s3.dropped.size() == 1);
  CHECK(s3.dropped[0] == 2);
  CHECK(s3.coef[2] == 0.0);
  CHECK(s3.coef[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(s3.coef[1] == doctest::Approx(-1.0).epsilon(1e-9));
}

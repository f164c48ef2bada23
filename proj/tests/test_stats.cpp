#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cdt/random.hpp"
#include "cdt/stats.hpp"

using namespace cdt;

TEST_CASE("erf matches frozen references and libm") {
  // References computed independently at 25-digit precision.
  CHECK(erf_cody(1.0) == doctest::Approx(0.8427007929497149).epsilon(1e-14));
  CHECK(erf_cody(0.3) == doctest::Approx(0.3286267594591274).epsilon(1e-14));
  CHECK(erf_cody(-2.7) == doctest::Approx(-0.9998656672600594).epsilon(1e-14));
  CHECK(erf_cody(5.1) == doctest::Approx(0.9999999999994507).epsilon(1e-14));
  CHECK(erf_cody(0.0) == 0.0);
  for (double x = -6.0; x <= 6.0; x += 0.01)
    CHECK(std::fabs(erf_cody(x) - std::erf(x)) < 1e-14);
  for (double x = 0.0; x <= 26.0; x += 0.25) {
    const double rel = std::erfc(x) > 0 ? std::fabs(erfc_cody(x) / std::erfc(x) - 1.0) : 0.0;
    CHECK(rel < 1e-12);
  }
}

TEST_CASE("normal cdf and quantile") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-14));
  CHECK(normal_cdf(-2.33) == doctest::Approx(0.009903075559164245).epsilon(1e-13));
  CHECK(normal_cdf(0.5) == doctest::Approx(0.6914624612740131).epsilon(1e-14));
  CHECK(normal_cdf(-0.5) == doctest::Approx(0.3085375387259869).epsilon(1e-14));

  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.01) == doctest::Approx(-2.3263478740408408).epsilon(1e-12));
  for (double p = 0.0005; p < 1.0; p += 0.0025)
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-11));
  CHECK_THROWS(normal_quantile(0.0));
  CHECK_THROWS(normal_quantile(1.0));
}

TEST_CASE("chi-square upper tail") {
  CHECK(chi_square_sf(2.0, 1) == doctest::Approx(0.15729920705028105).epsilon(1e-12));
  CHECK(chi_square_sf(3.84, 1) == doctest::Approx(0.05004352124870519).epsilon(1e-12));
  CHECK(chi_square_sf(5.2, 3) == doctest::Approx(0.15772445039666255).epsilon(1e-12));
  CHECK(chi_square_sf(27.5, 12) == doctest::Approx(0.0065425140702373395).epsilon(1e-12));
  CHECK(chi_square_sf(0.3, 7) == doctest::Approx(0.9998999626177479).epsilon(1e-12));
  CHECK(chi_square_sf(0.0, 4) == 1.0);
  CHECK(chi_square_sf(-1.0, 4) == 1.0);
}

TEST_CASE("rng streams are reproducible and tag-separated") {
  Rng a(42), b(42), c(derive_seed(42, {kTagForestTree, 0}));
  bool same = true, differ = false;
  for (int i = 0; i < 100; ++i) {
    const auto ua = a.next_u64();
    same = same && (ua == b.next_u64());
    differ = differ || (ua != c.next_u64());
  }
  CHECK(same);
  CHECK(differ);
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
}

TEST_CASE("rng uniform and normal moments") {
  Rng rng(7);
  const int n = 100000;
  double su = 0.0, sn = 0.0, snn = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    su += u;
    const double g = rng.normal();
    sn += g;
    snn += g * g;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sn / n == doctest::Approx(0.0).scale(1).epsilon(0.02));
  CHECK(snn / n == doctest::Approx(1.0).epsilon(0.03));

  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.uniform_int(13);
    CHECK(v < 13);
  }
}

TEST_CASE("descriptive helpers") {
  CHECK(mean({1.0, 2.0, 3.0}) == doctest::Approx(2.0));
  CHECK(sample_variance({0.0, 2.0}) == doctest::Approx(2.0));
  CHECK(sample_variance({5.0}) == 0.0);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.0) == doctest::Approx(1.0));
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 1.0) == doctest::Approx(4.0));
  CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == doctest::Approx(2.0));
}

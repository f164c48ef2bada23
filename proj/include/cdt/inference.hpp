#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cdt {

// Difference in mean outcomes between arms for one subgroup's rows; empty
// when either arm is absent.
std::optional<double> subgroup_dim(const std::vector<double>& y,
                                   const std::vector<int>& z);

// Plug-in variance s1^2/n1 + s0^2/n0 with n-1 denominators; empty when
// either arm has fewer than 2 units.
std::optional<double> subgroup_variance(const std::vector<double>& y,
                                        const std::vector<int>& z);

enum class HetVariant {
  CochranQ,     // weighted heterogeneity statistic, df = G - 1
  Projection,   // contrasts against the pooled estimate, df = G
};

struct HetTest {
  bool skipped = true;
  std::string reason;
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  HetVariant variant = HetVariant::CochranQ;
};

// taus/vars are per-subgroup estimates and variances (all defined and
// positive). overall_tau is only used by the Projection variant, which
// contrasts each subgroup against it with a diagonal covariance.
HetTest heterogeneity_test(const std::vector<double>& taus,
                           const std::vector<double>& vars, HetVariant variant,
                           double overall_tau = 0.0);

struct PropensityFit {
  std::vector<double> e;     // clipped to [0.01, 0.99]
  std::vector<double> coef;  // intercept first
  bool converged = false;
  bool separation_warning = false;
  std::size_t iterations = 0;
};

// Logistic regression of z on [1, x] by iteratively reweighted least
// squares: at most 100 iterations, stops when no coefficient moves more
// than 1e-8.
PropensityFit fit_propensity(const double* x, std::size_t n, std::size_t p,
                             const std::vector<int>& z);

// Fitted probability at a new row from a propensity coefficient vector,
// clipped to the same [0.01, 0.99] band.
double propensity_at(const std::vector<double>& coef, const double* row, std::size_t p);

struct DrEstimate {
  bool defined = false;
  std::string reason;
  double tau = 0.0;
  double variance = 0.0;
  std::vector<std::size_t> dropped_columns;  // covariate indices removed
};

// Within-subgroup weighted least squares of y on [1, z, x] with inverse
// propensity weights and a Huber-White sandwich variance for the z
// coefficient. Needs n >= p + 3 rows and both arms present.
DrEstimate dr_weighted_adjusted(const double* x, std::size_t n, std::size_t p,
                                const std::vector<double>& y, const std::vector<int>& z,
                                const std::vector<double>& e);

}  // namespace cdt

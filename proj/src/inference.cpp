#include "cdt/inference.hpp"

#include <algorithm>
#include <cmath>

#include "cdt/linalg.hpp"
#include "cdt/stats.hpp"

namespace cdt {

namespace {

void split_arms(const std::vector<double>& y, const std::vector<int>& z,
                std::vector<double>& y1, std::vector<double>& y0) {
  for (std::size_t i = 0; i < y.size(); ++i) (z[i] == 1 ? y1 : y0).push_back(y[i]);
}

}  // namespace

std::optional<double> subgroup_dim(const std::vector<double>& y,
                                   const std::vector<int>& z) {
  std::vector<double> y1, y0;
  split_arms(y, z, y1, y0);
  if (y1.empty() || y0.empty()) return std::nullopt;
  return mean(y1) - mean(y0);
}

std::optional<double> subgroup_variance(const std::vector<double>& y,
                                        const std::vector<int>& z) {
  std::vector<double> y1, y0;
  split_arms(y, z, y1, y0);
  if (y1.size() < 2 || y0.size() < 2) return std::nullopt;
  return sample_variance(y1) / static_cast<double>(y1.size()) +
         sample_variance(y0) / static_cast<double>(y0.size());
}

HetTest heterogeneity_test(const std::vector<double>& taus,
                           const std::vector<double>& vars, HetVariant variant,
                           double overall_tau) {
  HetTest out;
  out.variant = variant;
  const std::size_t g = taus.size();
  if (g != vars.size() || g < 2) {
    out.reason = "needs at least 2 subgroups with defined variances";
    return out;
  }
  for (double v : vars)
    if (!(v > 0.0)) {
      out.reason = "nonpositive subgroup variance";
      return out;
    }
  out.skipped = false;
  if (variant == HetVariant::CochranQ) {
    double wsum = 0.0, wtsum = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
      const double w = 1.0 / vars[i];
      wsum += w;
      wtsum += w * taus[i];
    }
    const double tbar = wtsum / wsum;
    double q = 0.0;
    for (std::size_t i = 0; i < g; ++i)
      q += (taus[i] - tbar) * (taus[i] - tbar) / vars[i];
    out.statistic = q;
    out.df = static_cast<double>(g - 1);
  } else {
    double s = 0.0;
    for (std::size_t i = 0; i < g; ++i)
      s += (taus[i] - overall_tau) * (taus[i] - overall_tau) / vars[i];
    out.statistic = s;
    out.df = static_cast<double>(g);
  }
  out.p_value = chi_square_sf(out.statistic, out.df);
  return out;
}

PropensityFit fit_propensity(const double* x, std::size_t n, std::size_t p,
                             const std::vector<int>& z) {
  const std::size_t d = p + 1;
  PropensityFit fit;
  fit.coef.assign(d, 0.0);
  std::vector<double> eta(n, 0.0), mu(n, 0.5);

  auto design = [&](std::size_t i, std::size_t j) -> double {
    return j == 0 ? 1.0 : x[i * p + (j - 1)];
  };

  const std::size_t max_iter = 100;
  const double tol = 1e-8;
  for (std::size_t iter = 1; iter <= max_iter; ++iter) {
    fit.iterations = iter;
    // Newton step: solve (X^T W X) delta = X^T (z - mu).
    std::vector<double> gram(d * d, 0.0), score(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
      for (std::size_t a = 0; a < d; ++a) {
        const double xa = design(i, a);
        score[a] += xa * (static_cast<double>(z[i]) - mu[i]);
        for (std::size_t b = a; b < d; ++b) gram[a * d + b] += w * xa * design(i, b);
      }
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < a; ++b) gram[a * d + b] = gram[b * d + a];
    const GramSolve sol = solve_gram(gram, score, d);
    double max_step = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      fit.coef[a] += sol.coef[a];
      max_step = std::max(max_step, std::fabs(sol.coef[a]));
    }
    double max_eta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      for (std::size_t a = 0; a < d; ++a) e += design(i, a) * fit.coef[a];
      eta[i] = std::clamp(e, -30.0, 30.0);
      mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      max_eta = std::max(max_eta, std::fabs(eta[i]));
    }
    if (max_step < tol) {
      fit.converged = true;
      break;
    }
    if (max_eta > 15.0) fit.separation_warning = true;
  }
  if (!fit.converged) fit.separation_warning = true;

  fit.e.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.e[i] = std::clamp(mu[i], 0.01, 0.99);
  return fit;
}

double propensity_at(const std::vector<double>& coef, const double* row, std::size_t p) {
  double eta = coef[0];
  for (std::size_t j = 0; j < p; ++j) eta += coef[j + 1] * row[j];
  eta = std::clamp(eta, -30.0, 30.0);
  return std::clamp(1.0 / (1.0 + std::exp(-eta)), 0.01, 0.99);
}

DrEstimate dr_weighted_adjusted(const double* x, std::size_t n, std::size_t p,
                                const std::vector<double>& y, const std::vector<int>& z,
                                const std::vector<double>& e) {
  DrEstimate out;
  if (n < p + 3) {
    out.reason = "needs at least p + 3 rows";
    return out;
  }
  bool has1 = false, has0 = false;
  for (int zi : z) (zi == 1 ? has1 : has0) = true;
  if (!has1 || !has0) {
    out.reason = "one arm is empty";
    return out;
  }

  // Columns: intercept, z, covariates.
  const std::size_t d = p + 2;
  auto design = [&](std::size_t i, std::size_t j) -> double {
    if (j == 0) return 1.0;
    if (j == 1) return static_cast<double>(z[i]);
    return x[i * p + (j - 2)];
  };
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = z[i] == 1 ? 1.0 / e[i] : 1.0 / (1.0 - e[i]);

  std::vector<double> gram(d * d, 0.0), rhs(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = design(i, a);
      rhs[a] += w[i] * xa * y[i];
      for (std::size_t b = a; b < d; ++b) gram[a * d + b] += w[i] * xa * design(i, b);
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < a; ++b) gram[a * d + b] = gram[b * d + a];

  const GramSolve sol = solve_gram(gram, rhs, d);
  for (std::size_t c : sol.dropped) {
    if (c == 1) {
      out.reason = "treatment column is collinear";
      return out;
    }
    if (c >= 2) out.dropped_columns.push_back(c - 2);
  }

  // Huber-White: V = G^-1 (sum w^2 eps^2 xx^T) G^-1, then the z entry.
  std::vector<double> meat(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double fit_i = 0.0;
    for (std::size_t a = 0; a < d; ++a) fit_i += design(i, a) * sol.coef[a];
    const double we = w[i] * (y[i] - fit_i);
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = design(i, a);
      for (std::size_t b = a; b < d; ++b)
        meat[a * d + b] += we * we * xa * design(i, b);
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < a; ++b) meat[a * d + b] = meat[b * d + a];

  double var = 0.0;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      var += sol.inverse[1 * d + a] * meat[a * d + b] * sol.inverse[b * d + 1];

  out.defined = true;
  out.tau = sol.coef[1];
  out.variance = var;
  return out;
}

}  // namespace cdt

#pragma once

#include <cstddef>
#include <vector>

namespace cdt {

// erf via W. J. Cody's rational Chebyshev approximations (Math. Comp. 23,
// 1969), the classic double-precision routine; relative error below 1e-16,
// comfortably inside the 1e-7 budget the rest of the code assumes.
double erf_cody(double x);
double erfc_cody(double x);

// Standard normal CDF, Phi(x) = erfc(-x / sqrt(2)) / 2.
double normal_cdf(double x);

// Inverse standard normal CDF: Acklam's rational approximation refined with
// one Halley step against normal_cdf. Used for sampling by inversion.
double normal_quantile(double p);

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x),
// series expansion for x < a+1 and continued fraction otherwise
// (Lentz's method).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution with df degrees of freedom.
double chi_square_sf(double x, double df);

double mean(const std::vector<double>& v);
// Sample variance with denominator n-1; 0 when fewer than 2 values.
double sample_variance(const std::vector<double>& v);

// Linear-interpolation quantile (type 7), q in [0,1]. v need not be sorted.
double quantile(std::vector<double> v, double q);

}  // namespace cdt

#pragma once

namespace jrt::math {

inline constexpr double kPi = 3.14159265358979323846;

// Floor used when clamping probabilities that feed logs or denominators.
inline constexpr double kProbFloor = 1e-12;

double normal_pdf(double x);
double normal_cdf(double x);

/// Inverse of normal_cdf on (0, 1); accurate into the far tails.
double normal_quantile(double p);

/// Clamp p into [kProbFloor, 1 - kProbFloor].
double clamp_prob(double p);

// Regularized incomplete gamma functions, P(a, x) + Q(a, x) = 1.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chi2_cdf(double x, double df);
double chi2_sf(double x, double df);
double chi2_quantile(double p, double df);

/// Upper tail of the Kolmogorov distribution: P(K > t) with t = sqrt(n) * D_n.
/// Alternating series, at most 100 terms, early exit when a term < 1e-10.
double kolmogorov_sf(double t);

}  // namespace jrt::math

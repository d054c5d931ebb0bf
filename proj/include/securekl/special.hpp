#pragma once

namespace securekl {

// ===== special functions for tail probabilities =====
//
// Lentz-style continued fractions / series, double precision, good to
// ~1e-12 relative over the ranges the test statistics use.

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b).
double beta_i(double a, double b, double x);

/// Two-sided survival p-value of a Student-t statistic with df degrees.
double student_t_two_sided(double t, double df);

/// Chi-square upper tail P[X >= x] with df degrees.
double chi2_sf(double x, double df);

} // namespace securekl

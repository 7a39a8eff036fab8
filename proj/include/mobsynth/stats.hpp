#pragma once

#include <span>

namespace mobsynth::stats {

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// Lentz continued fraction otherwise.
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

/// Survival function of the chi-squared distribution: Q(df / 2, x / 2).
double chi_squared_sf(double statistic, double df);

/// Two-sided p-value of Student's t: I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided_p(double t, double df);

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
};

/// Pearson correlation with a two-sided p-value from the t statistic
/// r sqrt((n-2)/(1-r^2)). Throws MetricError for n < 3, mismatched lengths or
/// a constant input.
Correlation pearson(std::span<const double> x, std::span<const double> y);

}  // namespace mobsynth::stats

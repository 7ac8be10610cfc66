#pragma once

namespace coharq {

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
/// Series below x < a + 1, Lentz continued fraction above; relative
/// accuracy about 1e-14. Throws ContractViolation for a <= 0 or x < 0.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
/// directly in the tail so small values keep their relative accuracy.
double regularized_gamma_q(double a, double x);

/// CDF at x of a Gamma(shape, rate) variable; x <= 0 gives 0.
double gamma_cdf(double shape, double rate, double x);

/// Density of a Gamma(shape, rate) variable.
double gamma_pdf(double shape, double rate, double x);

}  // namespace coharq

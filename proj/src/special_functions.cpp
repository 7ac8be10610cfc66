#include "coharq/special_functions.hpp"

#include <cmath>
#include <limits>

#include "coharq/errors.hpp"

namespace coharq {

namespace {

constexpr int kMaxIterations = 10000;
constexpr double kEpsilon = 1e-16;

// Prefactor x^a e^{-x} / Gamma(a) in log space.
double log_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

double series_p(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double denom = a;
  for (int i = 0; i < kMaxIterations; ++i) {
    denom += 1.0;
    term *= x / denom;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEpsilon) break;
  }
  return sum * std::exp(log_prefactor(a, x));
}

double continued_fraction_q(double a, double x) {
  constexpr double kTiny = std::numeric_limits<double>::min() / kEpsilon;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) break;
  }
  return std::exp(log_prefactor(a, x)) * h;
}

void check(double a, double x) {
  if (!(a > 0.0)) throw ContractViolation("incomplete gamma: shape must be positive");
  if (!(x >= 0.0)) throw ContractViolation("incomplete gamma: argument must be >= 0");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  check(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return series_p(a, x);
  return 1.0 - continued_fraction_q(a, x);
}

double regularized_gamma_q(double a, double x) {
  check(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - series_p(a, x);
  return continued_fraction_q(a, x);
}

double gamma_cdf(double shape, double rate, double x) {
  if (!(x > 0.0)) return 0.0;
  return regularized_gamma_p(shape, rate * x);
}

double gamma_pdf(double shape, double rate, double x) {
  if (x < 0.0) return 0.0;
  if (x == 0.0) return shape == 1.0 ? rate : (shape < 1.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x -
                  std::lgamma(shape));
}

}  // namespace coharq

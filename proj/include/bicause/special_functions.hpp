#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "bicause/errors.hpp"

// Log-gamma and regularized incomplete gamma functions. Lanczos (g = 7,
// 9 terms) for log-gamma; power series for P(a, x) when x < a + 1, modified
// Lentz continued fraction for Q(a, x) otherwise.
namespace bicause::special {

inline double log_gamma(double x) {
  static constexpr std::array<double, 9> kCoef = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x <= 0.0 && x == std::floor(x)) return std::numeric_limits<double>::infinity();
  if (x < 0.5) {
    // reflection
    return std::log(std::numbers::pi / std::abs(std::sin(std::numbers::pi * x))) - log_gamma(1.0 - x);
  }
  x -= 1.0;
  double sum = kCoef[0];
  for (int i = 1; i < 9; ++i) sum += kCoef[static_cast<std::size_t>(i)] / (x + i);
  const double t = x + 7.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (x + 0.5) * std::log(t) - t + std::log(sum);
}

/// log C(n, k) for 0 <= k <= n.
inline double log_choose(double n, double k) {
  return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

namespace detail {

constexpr int kMaxIterations = 10000;
constexpr double kEpsilon = 1e-16;

// log of the series sum for P(a, x): P = exp(-x + a log x - lgamma(a)) * sum
inline double log_gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEpsilon) break;
  }
  return -x + a * std::log(x) - log_gamma(a) + std::log(sum);
}

// log of Q(a, x) by continued fraction, valid for x >= a + 1.
inline double log_gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) break;
  }
  return -x + a * std::log(x) - log_gamma(a) + std::log(h);
}

}  // namespace detail

/// Lower regularized incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw InvalidArgument("gamma_p: requires a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return std::exp(detail::log_gamma_p_series(a, x));
  return -std::expm1(detail::log_gamma_q_fraction(a, x));
}

/// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw InvalidArgument("gamma_q: requires a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return -std::expm1(detail::log_gamma_p_series(a, x));
  return std::exp(detail::log_gamma_q_fraction(a, x));
}

/// log Q(a, x), accurate far into the tail where Q itself underflows.
inline double log_gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw InvalidArgument("log_gamma_q: requires a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return std::log1p(-std::exp(detail::log_gamma_p_series(a, x)));
  return detail::log_gamma_q_fraction(a, x);
}

/// Survival function of the chi-squared distribution.
inline double chi2_sf(double statistic, double df) {
  if (statistic <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * statistic);
}

inline double log_chi2_sf(double statistic, double df) {
  if (statistic <= 0.0) return 0.0;
  return log_gamma_q(0.5 * df, 0.5 * statistic);
}

}  // namespace bicause::special

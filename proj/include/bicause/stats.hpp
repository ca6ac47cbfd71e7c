#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "bicause/errors.hpp"
#include "bicause/special_functions.hpp"

namespace bicause {

inline constexpr double kInfiniteAsmd = std::numeric_limits<double>::infinity();

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // divisor n - 1; zero for a single value
};

inline MeanVar mean_var(std::span<const double> x) {
  MeanVar out;
  if (x.empty()) return out;
  out.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (const double v : x) ss += (v - out.mean) * (v - out.mean);
    out.variance = ss / static_cast<double>(x.size() - 1);
  }
  return out;
}

inline double asmd_from_moments(const MeanVar& treated, const MeanVar& control) {
  const double numerator = std::abs(treated.mean - control.mean);
  const double denominator = std::sqrt(treated.variance + control.variance);
  if (denominator == 0.0) return numerator == 0.0 ? 0.0 : kInfiniteAsmd;
  return numerator / denominator;
}

/// Absolute standardized mean difference |mean_t - mean_c| / sqrt(var_t + var_c).
/// Zero-variance groups with different means give kInfiniteAsmd.
inline double asmd(std::span<const double> x_treated, std::span<const double> x_control) {
  if (x_treated.empty() || x_control.empty()) throw InvalidArgument("asmd: empty treatment group");
  return asmd_from_moments(mean_var(x_treated), mean_var(x_control));
}

/// 2x2 contingency table. Rows are treatment (0 then 1), columns split side
/// (left then right): a = control/left, b = control/right, c = treated/left,
/// d = treated/right.
struct Table2x2 {
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t c = 0;
  std::int64_t d = 0;

  std::int64_t total() const { return a + b + c + d; }
  std::int64_t row0() const { return a + b; }
  std::int64_t row1() const { return c + d; }
  std::int64_t col0() const { return a + c; }
  std::int64_t col1() const { return b + d; }

  void validate() const {
    if (a < 0 || b < 0 || c < 0 || d < 0) throw InvalidArgument("Table2x2: negative count");
    if (total() < 1) throw InvalidArgument("Table2x2: empty table");
  }
};

namespace detail {
// Relative tolerance when comparing a table's probability with the observed one.
constexpr double kFisherRelativeTolerance = 1e-12;
}  // namespace detail

/// log of the two-sided Fisher exact p-value: sum of the probabilities of all
/// tables with the observed margins that are no more probable than the
/// observed table.
inline double fisher_exact_log_p(const Table2x2& t) {
  t.validate();
  const auto n = static_cast<double>(t.total());
  const auto r0 = static_cast<double>(t.row0());
  const auto r1 = static_cast<double>(t.row1());
  const auto c0 = static_cast<double>(t.col0());
  const std::int64_t lo = std::max<std::int64_t>(0, t.row0() - t.col1());
  const std::int64_t hi = std::min(t.row0(), t.col0());
  if (lo == hi) return 0.0;

  const double log_denominator = special::log_choose(n, c0);
  auto log_pmf = [&](std::int64_t k) {
    const auto kd = static_cast<double>(k);
    return special::log_choose(r0, kd) + special::log_choose(r1, c0 - kd) - log_denominator;
  };
  const double cutoff = log_pmf(t.a) + std::log1p(detail::kFisherRelativeTolerance);

  // two passes: find the max included term, then accumulate relative to it
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> included;
  included.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t k = lo; k <= hi; ++k) {
    const double lp = log_pmf(k);
    if (lp <= cutoff) {
      included.push_back(lp);
      max_term = std::max(max_term, lp);
    }
  }
  double sum = 0.0;
  for (const double lp : included) sum += std::exp(lp - max_term);
  return std::min(0.0, max_term + std::log(sum));
}

inline double fisher_exact_p(const Table2x2& t) { return std::exp(fisher_exact_log_p(t)); }

/// Pearson statistic n(ad - bc)^2 / (row0 row1 col0 col1), no continuity correction.
inline double chi2_statistic(const Table2x2& t) {
  t.validate();
  if (t.row0() == 0 || t.row1() == 0 || t.col0() == 0 || t.col1() == 0) {
    throw InvalidArgument("chi2 test: table has a zero margin");
  }
  const auto n = static_cast<double>(t.total());
  const double cross = static_cast<double>(t.a) * static_cast<double>(t.d) -
                       static_cast<double>(t.b) * static_cast<double>(t.c);
  const double margins = static_cast<double>(t.row0()) * static_cast<double>(t.row1()) *
                         static_cast<double>(t.col0()) * static_cast<double>(t.col1());
  return n * (cross / margins) * cross;
}

inline double chi2_log_p(const Table2x2& t) { return special::log_chi2_sf(chi2_statistic(t), 1.0); }
inline double chi2_p(const Table2x2& t) { return special::chi2_sf(chi2_statistic(t), 1.0); }

enum class SplitTest {
  automatic,  // chi2 when every expected count >= 5, Fisher otherwise
  fisher,
  chi2,
};

/// True when every expected cell count under independence is at least 5.
inline bool chi2_applicable(const Table2x2& t) {
  t.validate();
  const auto n = static_cast<double>(t.total());
  const double rows[2] = {static_cast<double>(t.row0()), static_cast<double>(t.row1())};
  const double cols[2] = {static_cast<double>(t.col0()), static_cast<double>(t.col1())};
  for (const double r : rows) {
    for (const double c : cols) {
      if (r * c / n < 5.0) return false;
    }
  }
  return true;
}

inline bool uses_chi2(const Table2x2& t, SplitTest policy) {
  switch (policy) {
    case SplitTest::fisher:
      return false;
    case SplitTest::chi2:
      return t.row0() > 0 && t.row1() > 0 && t.col0() > 0 && t.col1() > 0;
    case SplitTest::automatic:
      break;
  }
  return chi2_applicable(t);
}

/// log p-value of the split test; split selection compares in log space
/// because strong splits underflow double precision.
inline double split_log_p_value(const Table2x2& t, SplitTest policy = SplitTest::automatic) {
  return uses_chi2(t, policy) ? chi2_log_p(t) : fisher_exact_log_p(t);
}

inline double split_p_value(const Table2x2& t, SplitTest policy = SplitTest::automatic) {
  return std::exp(split_log_p_value(t, policy));
}

struct CorrectionResult {
  std::vector<double> adjusted_p;
  std::vector<bool> reject;
  double alpha = 0.05;
};

/// Holm step-down correction. Results are in input order.
inline CorrectionResult holm_bonferroni(std::span<const double> p, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("holm_bonferroni: alpha must lie in (0, 1)");
  for (const double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("holm_bonferroni: p-value outside [0, 1]");
  }
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });

  CorrectionResult out;
  out.alpha = alpha;
  out.adjusted_p.assign(m, 1.0);
  out.reject.assign(m, false);
  double running = 0.0;
  bool rejecting = true;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = order[k];
    const double scale = static_cast<double>(m - k);
    running = std::max(running, std::min(1.0, scale * p[i]));
    out.adjusted_p[i] = running;
    rejecting = rejecting && p[i] <= alpha / scale;
    out.reject[i] = rejecting;
  }
  return out;
}

}  // namespace bicause

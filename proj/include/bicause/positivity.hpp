#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bicause/errors.hpp"

namespace bicause {

enum class PositivityMethod { crump, symmetric_prevalence };

inline std::string to_string(PositivityMethod m) {
  return m == PositivityMethod::crump ? "crump" : "symmetric_prevalence";
}

/// Propensity interval [lo, hi] inside which overlap is deemed sufficient.
struct Cutoffs {
  double lo = 0.0;
  double hi = 1.0;
  PositivityMethod method = PositivityMethod::crump;
  std::map<std::string, double> parameters;

  bool contains(double propensity) const { return propensity >= lo && propensity <= hi; }
};

/// Crump-style symmetric trimming. Searches alpha on the grid
/// 0.5 k / segments, k = 1..segments, and returns the smallest alpha with
///   1 / (alpha (1 - alpha)) <= 2 mean{ 1 / (e (1 - e)) : e (1 - e) >= alpha (1 - alpha) }.
/// Without a feasible alpha the interval is [0, 1] (no trimming).
inline Cutoffs crump_cutoffs(std::span<const double> propensities, int segments = 10000) {
  if (propensities.empty()) throw InvalidArgument("crump_cutoffs: empty propensity vector");
  if (segments < 2) throw InvalidArgument("crump_cutoffs: segments must be at least 2");

  // inverse variance weights, ascending, with prefix sums for subset means
  std::vector<double> inverse;
  inverse.reserve(propensities.size());
  for (const double e : propensities) {
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidArgument("crump_cutoffs: propensity outside [0, 1]");
    const double w = e * (1.0 - e);
    if (w > 0.0) inverse.push_back(1.0 / w);
  }
  std::sort(inverse.begin(), inverse.end());
  std::vector<double> prefix(inverse.size() + 1, 0.0);
  for (std::size_t i = 0; i < inverse.size(); ++i) prefix[i + 1] = prefix[i] + inverse[i];

  Cutoffs out;
  out.method = PositivityMethod::crump;
  out.parameters["segments"] = segments;
  for (int k = 1; k <= segments; ++k) {
    const double alpha = 0.5 * static_cast<double>(k) / static_cast<double>(segments);
    const double bound = 1.0 / (alpha * (1.0 - alpha));
    const auto count = static_cast<std::size_t>(std::upper_bound(inverse.begin(), inverse.end(), bound) - inverse.begin());
    if (count == 0) continue;
    const double mean = prefix[count] / static_cast<double>(count);
    if (bound <= 2.0 * mean) {
      out.lo = alpha;
      out.hi = 1.0 - alpha;
      out.parameters["alpha"] = alpha;
      return out;
    }
  }
  return out;
}

/// Prevalence-adjusted cutoffs; (alpha, 1 - alpha) when mu = 0.5.
inline Cutoffs symmetric_prevalence_cutoffs(double mu, double alpha = 0.1) {
  if (!(mu > 0.0 && mu < 1.0)) throw InvalidArgument("symmetric_prevalence_cutoffs: prevalence must lie in (0, 1)");
  if (!(alpha >= 0.0 && alpha < 0.5)) throw InvalidArgument("symmetric_prevalence_cutoffs: alpha must lie in [0, 0.5)");
  Cutoffs out;
  out.method = PositivityMethod::symmetric_prevalence;
  out.hi = (1.0 - alpha) * mu / ((1.0 - alpha) * mu + alpha * (1.0 - mu));
  out.lo = alpha * mu / (alpha * mu + (1.0 - alpha) * (1.0 - mu));
  out.parameters["alpha"] = alpha;
  out.parameters["prevalence"] = mu;
  return out;
}

}  // namespace bicause

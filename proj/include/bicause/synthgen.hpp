#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bicause/dataset.hpp"
#include "bicause/errors.hpp"
#include "bicause/rng.hpp"

namespace bicause {

enum class GeneratorKind { natural_experiment, positivity_violations };

inline GeneratorKind parse_generator_kind(std::string_view s) {
  if (s == "natural-experiment" || s == "natural_experiment") return GeneratorKind::natural_experiment;
  if (s == "positivity" || s == "positivity-violations" || s == "positivity_violations") {
    return GeneratorKind::positivity_violations;
  }
  throw InvalidArgument("unknown dataset kind '" + std::string(s) + "' (expected natural-experiment or positivity)");
}

inline std::string to_string(GeneratorKind k) {
  return k == GeneratorKind::natural_experiment ? "natural-experiment" : "positivity";
}

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::natural_experiment;
  std::int64_t n = 20000;
  std::uint64_t seed = 0;
  int extra_noise_features = 0;
};

/// Normal(mean, sd^2) conditioned on [lo, hi], by rejection.
inline double sample_truncnorm(double mean, double sd, double lo, double hi, CounterRng& rng) {
  if (!(lo < hi)) throw InvalidArgument("sample_truncnorm: need lo < hi");
  if (!(sd > 0.0)) throw InvalidArgument("sample_truncnorm: need sd > 0");
  const auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2)); };
  if (cdf(hi) - cdf(lo) < 1e-6) throw InvalidArgument("sample_truncnorm: interval carries negligible probability mass");
  for (;;) {
    const double x = rng.normal(mean, sd);
    if (x >= lo && x <= hi) return x;
  }
}

/// Per-cell treatment propensity distribution and outcome probabilities.
struct CellSpec {
  double propensity_mean;
  double propensity_sd;
  double p_y1;
  double p_y0;
};

namespace detail {

// Natural experiment cells indexed by 2 * S + (A >= 50).
inline constexpr std::array<CellSpec, 4> kNaturalCells{{
    {0.4, 0.1, 0.15, 0.3},  // S=0, A<50
    {0.1, 0.1, 0.4, 0.8},   // S=0, A>=50
    {0.3, 0.1, 0.2, 0.4},   // S=1, A<50
    {0.5, 0.1, 0.1, 0.2},   // S=1, A>=50
}};

// Positivity cells indexed by 4 * S + 2 * C + A.
inline constexpr std::array<CellSpec, 8> kPositivityCells{{
    {0.00, 0.02, 0.09, 0.73},  // 0,0,0
    {0.24, 0.10, 0.24, 0.43},  // 0,0,1
    {0.17, 0.10, 0.29, 0.51},  // 0,1,0
    {0.30, 0.10, 0.36, 0.40},  // 0,1,1
    {0.42, 0.10, 0.10, 0.45},  // 1,0,0
    {0.32, 0.10, 0.21, 0.29},  // 1,0,1
    {0.12, 0.10, 0.08, 0.40},  // 1,1,0
    {1.00, 0.02, 0.13, 0.31},  // 1,1,1
}};

struct Draws {
  std::vector<Treatment> t;
  std::vector<double> y, y0, y1;
};

// Propensity, treatment and potential outcomes of one row, in that order.
inline void draw_row(const CellSpec& cell, CounterRng& rng, Draws& out) {
  const double e = sample_truncnorm(cell.propensity_mean, cell.propensity_sd, 0.0, 1.0, rng);
  const Treatment t = rng.bernoulli(e) ? 1 : 0;
  const double y1 = rng.bernoulli(cell.p_y1) ? 1.0 : 0.0;
  const double y0 = rng.bernoulli(cell.p_y0) ? 1.0 : 0.0;
  out.t.push_back(t);
  out.y1.push_back(y1);
  out.y0.push_back(y0);
  out.y.push_back(t ? y1 : y0);
}

inline Dataset assemble(Eigen::MatrixXd x, std::vector<std::string> names, Draws d) {
  return Dataset(std::move(x), std::move(names), std::move(d.t), std::move(d.y),
                 PotentialOutcomes{std::move(d.y0), std::move(d.y1)});
}

}  // namespace detail

inline const std::array<CellSpec, 4>& natural_experiment_cells() { return detail::kNaturalCells; }
inline const std::array<CellSpec, 8>& positivity_cells() { return detail::kPositivityCells; }

/// Cell index 2 * S + (A >= 50) of a natural-experiment row.
inline int natural_experiment_cell(const Dataset& ds, std::size_t row) {
  return 2 * static_cast<int>(ds.feature(row, 0) != 0.0) + static_cast<int>(ds.feature(row, 1) >= 50.0);
}

/// Cell index 4 * S + 2 * C + A of a positivity row.
inline int positivity_cell(const Dataset& ds, std::size_t row) {
  return 4 * static_cast<int>(ds.feature(row, 0) != 0.0) + 2 * static_cast<int>(ds.feature(row, 1) != 0.0) +
         static_cast<int>(ds.feature(row, 2) != 0.0);
}

/// Sex S ~ Ber(0.5), age A ~ Normal(50, 20^2); four (S, A >= 50) cells, each
/// a natural experiment with its own truncated-normal propensity.
inline Dataset gen_natural_experiment(std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("gen_natural_experiment: n must be at least 1");
  CounterRng rng(seed);
  Eigen::MatrixXd x(n, 2);
  detail::Draws d;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double a = rng.normal(50.0, 20.0);
    x(i, 0) = s;
    x(i, 1) = a;
    const int cell = 2 * static_cast<int>(s) + static_cast<int>(a >= 50.0);
    detail::draw_row(detail::kNaturalCells[static_cast<std::size_t>(cell)], rng, d);
  }
  return detail::assemble(std::move(x), {"S", "A"}, std::move(d));
}

/// Binary S ~ Ber(0.5), C ~ Ber(0.3), A ~ Ber(0.1); cells (1,1,1) and (0,0,0)
/// are almost always and almost never treated.
inline Dataset gen_positivity(std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("gen_positivity: n must be at least 1");
  CounterRng rng(seed);
  Eigen::MatrixXd x(n, 3);
  detail::Draws d;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = rng.bernoulli(0.5);
    const int c = rng.bernoulli(0.3);
    const int a = rng.bernoulli(0.1);
    x(i, 0) = s;
    x(i, 1) = c;
    x(i, 2) = a;
    detail::draw_row(detail::kPositivityCells[static_cast<std::size_t>(4 * s + 2 * c + a)], rng, d);
  }
  return detail::assemble(std::move(x), {"S", "C", "A"}, std::move(d));
}

/// Appends d_extra independent standard-normal columns noise_0, noise_1, ...
inline Dataset augment_noise_features(const Dataset& ds, int d_extra, std::uint64_t seed) {
  if (d_extra < 0) throw InvalidArgument("augment_noise_features: d_extra must be non-negative");
  if (d_extra == 0) return ds;
  CounterRng rng(seed, /*stream=*/1);
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd extra(n, d_extra);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d_extra; ++j) extra(i, j) = rng.normal();
  std::vector<std::string> names;
  for (int k = 0; k < d_extra; ++k) names.push_back("noise_" + std::to_string(k));
  return ds.with_extra_features(extra, names);
}

inline Dataset generate(const GeneratorSpec& spec) {
  if (spec.extra_noise_features < 0) throw InvalidArgument("extra_noise_features must be non-negative");
  Dataset ds = spec.kind == GeneratorKind::natural_experiment ? gen_natural_experiment(spec.n, spec.seed)
                                                              : gen_positivity(spec.n, spec.seed);
  return augment_noise_features(ds, spec.extra_noise_features, spec.seed);
}

/// Generative cell label of every row, for partition-recovery scores.
inline std::vector<int> generative_cells(GeneratorKind kind, const Dataset& ds) {
  std::vector<int> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out[i] = kind == GeneratorKind::natural_experiment ? natural_experiment_cell(ds, i) : positivity_cell(ds, i);
  }
  return out;
}

}  // namespace bicause

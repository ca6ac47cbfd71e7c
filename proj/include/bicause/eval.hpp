#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bicause/dataset.hpp"
#include "bicause/errors.hpp"
#include "bicause/estimators.hpp"
#include "bicause/rng.hpp"
#include "bicause/stats.hpp"
#include "bicause/synthgen.hpp"
#include "bicause/tree.hpp"

namespace bicause {

/// Pair-counting adjusted Rand index (Hubert and Arabie).
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw InvalidArgument("adjusted_rand_index: label vectors differ in length");
  if (a.size() < 2) throw InvalidArgument("adjusted_rand_index: need at least two items");
  std::map<std::pair<int, int>, std::int64_t> joint;
  std::map<int, std::int64_t> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  auto pairs = [](std::int64_t k) { return 0.5 * static_cast<double>(k) * static_cast<double>(k - 1); };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, k] : joint) index += pairs(k);
  for (const auto& [key, k] : rows) sum_a += pairs(k);
  for (const auto& [key, k] : cols) sum_b += pairs(k);
  const double expected = sum_a * sum_b / pairs(static_cast<std::int64_t>(a.size()));
  const double max_index = 0.5 * (sum_a + sum_b);
  // both partitions trivial (all singletons or one block): identical by construction
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// benchmark methods

enum class Method { bicause_marginal, bicause_ipw, ipw_lr, matching, marginal };

inline constexpr std::array<Method, 5> kAllMethods{Method::bicause_marginal, Method::bicause_ipw, Method::ipw_lr,
                                                   Method::matching, Method::marginal};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::bicause_marginal: return "bicause-marginal";
    case Method::bicause_ipw: return "bicause-ipw";
    case Method::ipw_lr: return "ipw-lr";
    case Method::matching: return "matching";
    case Method::marginal: return "marginal";
  }
  return "?";
}

inline std::string valid_method_names() {
  std::string out;
  for (const auto m : kAllMethods) out += (out.empty() ? "" : ", ") + to_string(m);
  return out;
}

inline Method parse_method(std::string_view s) {
  for (const auto m : kAllMethods)
    if (to_string(m) == s) return m;
  throw InvalidArgument("unknown method '" + std::string(s) + "'; valid methods: " + valid_method_names());
}

/// "all" or a comma-separated list of method names.
inline std::vector<Method> parse_methods(std::string_view list) {
  if (list == "all") return {kAllMethods.begin(), kAllMethods.end()};
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto end = std::min(list.find(',', start), list.size());
    const auto name = detail::trim(list.substr(start, end - start));
    if (!name.empty()) {
      const Method m = parse_method(name);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    start = end + 1;
  }
  if (out.empty()) throw InvalidArgument("no methods given; valid methods: " + valid_method_names());
  return out;
}

struct MethodRun {
  int replication = 0;
  Method method = Method::marginal;
  std::optional<double> ate_hat;  // empty when the method failed
  double ate_true = 0.0;
  double kept_fraction = 1.0;
  double runtime_seconds = 0.0;
  std::string error;

  std::optional<double> bias() const {
    if (!ate_hat) return std::nullopt;
    return *ate_hat - ate_true;
  }
};

struct ReplicationDiagnostics {
  int replication = 0;
  double kept_fraction = 1.0;
  int n_leaves = 0;
  int n_violating = 0;
  std::vector<double> weighted_asmd;  // per feature, on kept test rows
  double max_weighted_asmd = 0.0;
};

struct MethodSummary {
  Method method = Method::marginal;
  int n_ok = 0;
  int n_failed = 0;
  double median_abs_bias = 0.0;
  double mean_bias = 0.0;
  double sd_bias = 0.0;
  double mean_kept_fraction = 0.0;
};

struct BenchmarkResult {
  std::vector<std::string> feature_names;
  std::vector<MethodRun> runs;  // replication-major, methods in request order
  std::vector<ReplicationDiagnostics> diagnostics;
  std::vector<MethodSummary> summary;

  const MethodSummary& summary_for(Method m) const {
    for (const auto& s : summary)
      if (s.method == m) return s;
    throw InvalidArgument("method " + to_string(m) + " was not benchmarked");
  }
};

struct BenchmarkOptions {
  double train_fraction = 0.5;
  int jobs = 1;
  PropensityClip clip{};
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Leaf-size-weighted ASMD per feature, sum_l (n_l / n) ASMD_l,j, over the
/// non-violating leaves of `tree` whose rows in `ds` contain both arms; n is
/// the number of rows in those leaves.
inline std::vector<double> weighted_asmd(const Tree& tree, const Dataset& ds) {
  std::vector<std::vector<std::size_t>> members(tree.nodes.size());
  for (std::size_t i = 0; i < ds.size(); ++i) members[static_cast<std::size_t>(assign_leaf(tree, ds, i))].push_back(i);
  std::vector<double> total(ds.num_features(), 0.0);
  std::size_t n = 0;
  for (const auto& nd : tree.nodes) {
    if (!nd.is_leaf() || nd.is_violating) continue;
    const auto& rows = members[static_cast<std::size_t>(nd.id)];
    const auto [treated, control] = detail::arm_counts(ds, rows);
    if (treated == 0 || control == 0) continue;
    const auto leaf_asmd = detail::feature_asmds(ds, rows);
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += static_cast<double>(rows.size()) * leaf_asmd[j];
    n += rows.size();
  }
  if (n > 0)
    for (auto& v : total) v /= static_cast<double>(n);
  return total;
}

namespace detail {

inline std::vector<std::size_t> rows_excluding(const Dataset& ds, std::span<const RowId> excluded_sorted) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!std::binary_search(excluded_sorted.begin(), excluded_sorted.end(), ds.row_ids()[i])) out.push_back(i);
  }
  return out;
}

inline std::vector<std::size_t> rows_in_usable_leaves(const Tree& tree, const Dataset& ds) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!tree.nodes[static_cast<std::size_t>(assign_leaf(tree, ds, i))].is_violating) out.push_back(i);
  }
  return out;
}

struct ReplicationOutput {
  std::vector<MethodRun> runs;
  ReplicationDiagnostics diagnostics;
};

inline ReplicationOutput run_replication(const Dataset& ds, const std::vector<Method>& methods, int r, std::uint64_t seed,
                                         FitConfig cfg, const BenchmarkOptions& options) {
  using clock = std::chrono::steady_clock;
  ReplicationOutput out;
  out.diagnostics.replication = r;
  auto [train, test] = split_train_test(ds, options.train_fraction, seed);
  cfg.seed = seed;

  const auto fit_start = clock::now();
  std::optional<Tree> tree;
  std::string fit_error;
  try {
    tree = fit(train, cfg);
  } catch (const std::exception& e) {
    fit_error = e.what();
  }
  const double fit_seconds = std::chrono::duration<double>(clock::now() - fit_start).count();

  // The kept population is whatever the tree's marginal estimator keeps; every
  // method and the ground truth are evaluated on exactly those test rows.
  std::optional<EffectReport> reference;
  if (tree) {
    try {
      reference = tree_ate(*tree, test, LeafEstimator::marginal, options.clip);
    } catch (const std::exception& e) {
      fit_error = e.what();
    }
  }
  if (!reference) {
    for (const auto m : methods) {
      MethodRun run;
      run.replication = r;
      run.method = m;
      run.error = fit_error.empty() ? "tree fit failed" : fit_error;
      out.runs.push_back(std::move(run));
    }
    return out;
  }

  const auto kept_rows = rows_excluding(test, reference->excluded_row_ids);
  const Dataset kept_test = test.subset(kept_rows);
  const Dataset kept_train = train.subset(rows_in_usable_leaves(*tree, train));
  const auto& po = *kept_test.potential_outcomes();
  double truth = 0.0;
  for (std::size_t i = 0; i < kept_test.size(); ++i) truth += po.y1[i] - po.y0[i];
  truth /= static_cast<double>(kept_test.size());

  out.diagnostics.kept_fraction = reference->kept_fraction;
  out.diagnostics.n_leaves = static_cast<int>(tree->num_leaves());
  out.diagnostics.n_violating = static_cast<int>(tree->violating_leaf_ids().size());
  out.diagnostics.weighted_asmd = weighted_asmd(*tree, test);
  for (const double v : out.diagnostics.weighted_asmd)
    out.diagnostics.max_weighted_asmd = std::max(out.diagnostics.max_weighted_asmd, v);

  for (const auto m : methods) {
    MethodRun run;
    run.replication = r;
    run.method = m;
    run.ate_true = truth;
    run.kept_fraction = reference->kept_fraction;
    const auto start = clock::now();
    try {
      switch (m) {
        case Method::bicause_marginal: run.ate_hat = reference->ate; break;
        case Method::bicause_ipw: run.ate_hat = tree_ate(*tree, test, LeafEstimator::ipw, options.clip).ate; break;
        case Method::ipw_lr: run.ate_hat = ipw_lr_ate(kept_train, kept_test, options.clip).ate; break;
        case Method::matching: run.ate_hat = matching_ate(kept_test, kept_train).ate; break;
        case Method::marginal: run.ate_hat = marginal_ate(kept_test).ate; break;
      }
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    run.runtime_seconds = std::chrono::duration<double>(clock::now() - start).count();
    if (m == Method::bicause_marginal || m == Method::bicause_ipw) run.runtime_seconds += fit_seconds;
    out.runs.push_back(std::move(run));
  }
  return out;
}

inline std::vector<MethodSummary> summarize(const std::vector<MethodRun>& runs, const std::vector<Method>& methods) {
  std::vector<MethodSummary> out;
  for (const auto m : methods) {
    MethodSummary s;
    s.method = m;
    std::vector<double> abs_bias, bias, kept;
    for (const auto& run : runs) {
      if (run.method != m) continue;
      if (const auto b = run.bias()) {
        bias.push_back(*b);
        abs_bias.push_back(std::abs(*b));
        kept.push_back(run.kept_fraction);
      } else {
        ++s.n_failed;
      }
    }
    s.n_ok = static_cast<int>(bias.size());
    s.median_abs_bias = median(abs_bias);
    s.mean_bias = mean(bias);
    double ss = 0.0;
    for (const double b : bias) ss += (b - s.mean_bias) * (b - s.mean_bias);
    s.sd_bias = bias.size() > 1 ? std::sqrt(ss / static_cast<double>(bias.size() - 1)) : 0.0;
    s.mean_kept_fraction = mean(kept);
    out.push_back(s);
  }
  return out;
}

// Runs job(r) for r in [0, count) on up to `jobs` threads.
template <typename Job>
void parallel_for(int count, int jobs, Job&& job) {
  jobs = std::clamp(jobs, 1, std::max(count, 1));
  if (jobs == 1) {
    for (int r = 0; r < count; ++r) job(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int r = next++; r < count; r = next++) job(r);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Replicated train/test evaluation. Replication r splits `ds` with seed
/// base_seed + r, fits on the training half and evaluates every method on the
/// test rows the fitted tree keeps; truth is mean(y1 - y0) over those rows.
inline BenchmarkResult run_bias_benchmark(const Dataset& ds, const std::vector<Method>& methods, int replications,
                                          std::uint64_t base_seed, const FitConfig& cfg,
                                          const BenchmarkOptions& options = {}) {
  if (replications < 1) throw InvalidArgument("replications must be at least 1");
  if (methods.empty()) throw InvalidArgument("no methods requested");
  if (!ds.has_potential_outcomes()) throw InvalidArgument("benchmark data needs potential outcome columns y0 and y1");
  cfg.validate();

  std::vector<detail::ReplicationOutput> outputs(static_cast<std::size_t>(replications));
  detail::parallel_for(replications, options.jobs, [&](int r) {
    outputs[static_cast<std::size_t>(r)] =
        detail::run_replication(ds, methods, r, base_seed + static_cast<std::uint64_t>(r), cfg, options);
  });

  BenchmarkResult result;
  result.feature_names = ds.feature_names();
  for (auto& o : outputs) {
    for (auto& run : o.runs) result.runs.push_back(std::move(run));
    result.diagnostics.push_back(std::move(o.diagnostics));
  }
  result.summary = detail::summarize(result.runs, methods);
  return result;
}

// ---------------------------------------------------------------------------
// depth sweep and ablation

struct DepthSweepResult {
  std::vector<int> depths;
  std::vector<BenchmarkResult> results;  // one per depth, marginal tree estimator only
};

inline DepthSweepResult depth_sweep(const Dataset& ds, const std::vector<int>& depths, int replications,
                                    std::uint64_t base_seed, FitConfig cfg, const BenchmarkOptions& options = {}) {
  if (depths.empty()) throw InvalidArgument("depth_sweep: no depths given");
  DepthSweepResult out;
  for (const int d : depths) {
    cfg.max_depth = d;
    out.depths.push_back(d);
    out.results.push_back(run_bias_benchmark(ds, {Method::bicause_marginal}, replications, base_seed, cfg, options));
  }
  return out;
}

struct AblationResult {
  BenchmarkResult max_asmd;
  BenchmarkResult random;
};

inline AblationResult ablation_feature_selection(const Dataset& ds, int replications, std::uint64_t base_seed,
                                                 FitConfig cfg, const BenchmarkOptions& options = {}) {
  AblationResult out;
  cfg.feature_selection = FeatureSelection::max_asmd;
  out.max_asmd = run_bias_benchmark(ds, {Method::bicause_marginal}, replications, base_seed, cfg, options);
  cfg.feature_selection = FeatureSelection::random;
  out.random = run_bias_benchmark(ds, {Method::bicause_marginal}, replications, base_seed, cfg, options);
  return out;
}

inline double median_max_weighted_asmd(const BenchmarkResult& r) {
  std::vector<double> v;
  for (const auto& d : r.diagnostics)
    if (!d.weighted_asmd.empty()) v.push_back(d.max_weighted_asmd);
  return median(v);
}

// ---------------------------------------------------------------------------
// partition recovery

struct PartitionRecovery {
  std::vector<double> ari;
  std::vector<double> kept_fraction;  // fraction of all rows outside violating leaves
};

/// Fits on a train_fraction subsample per replication and scores the leaf
/// partition of every row against the generative labels.
inline PartitionRecovery partition_recovery(const Dataset& ds, std::span<const int> labels, int replications,
                                            std::uint64_t base_seed, FitConfig cfg, double train_fraction = 0.7,
                                            int jobs = 1) {
  if (labels.size() != ds.size()) throw InvalidArgument("partition_recovery: one label per row required");
  if (replications < 1) throw InvalidArgument("replications must be at least 1");
  PartitionRecovery out;
  out.ari.resize(static_cast<std::size_t>(replications));
  out.kept_fraction.resize(static_cast<std::size_t>(replications));
  detail::parallel_for(replications, jobs, [&](int r) {
    const auto seed = base_seed + static_cast<std::uint64_t>(r);
    const auto idx = split_indices(ds.size(), train_fraction, seed);
    FitConfig c = cfg;
    c.seed = seed;
    const Tree tree = fit(ds.subset(idx.train), c);
    const auto leaves = assign_leaves(tree, ds);
    std::size_t kept = 0;
    for (const int leaf : leaves) kept += !tree.nodes[static_cast<std::size_t>(leaf)].is_violating;
    out.ari[static_cast<std::size_t>(r)] = adjusted_rand_index(leaves, labels);
    out.kept_fraction[static_cast<std::size_t>(r)] = static_cast<double>(kept) / static_cast<double>(ds.size());
  });
  return out;
}

// ---------------------------------------------------------------------------
// calibration

struct CalibrationBin {
  int bin = 0;
  double predicted = 0.0;  // mean prediction in the bin
  double observed = 0.0;   // fraction of positives in the bin
  std::size_t count = 0;
};

struct CalibrationCurve {
  int n_bins = 10;
  std::vector<CalibrationBin> bins;  // non-empty bins only, ascending
};

inline CalibrationCurve calibration_curve(std::span<const double> predicted, std::span<const Treatment> actual, int n_bins = 10) {
  if (n_bins < 1) throw InvalidArgument("calibration_curve: n_bins must be at least 1");
  if (predicted.size() != actual.size()) throw InvalidArgument("calibration_curve: length mismatch");
  std::vector<double> sum_p(static_cast<std::size_t>(n_bins), 0.0), sum_y(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(n_bins), 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double p = predicted[i];
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("calibration_curve: prediction outside [0, 1]");
    const auto b = static_cast<std::size_t>(std::min(static_cast<int>(p * n_bins), n_bins - 1));
    sum_p[b] += p;
    sum_y[b] += actual[i];
    ++count[b];
  }
  CalibrationCurve out;
  out.n_bins = n_bins;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    const auto c = static_cast<double>(count[b]);
    out.bins.push_back({static_cast<int>(b), sum_p[b] / c, sum_y[b] / c, count[b]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// treatment coefficient under four adjustment sets

struct AdjustmentEstimate {
  std::string model;
  double treatment_coefficient = 0.0;
};

/// Y = A + X1 + X2 with A ~ Ber(0.5), X1 ~ N(0, 1), X2 | A ~ N(A, 1). Fits
/// Y ~ 1 + A with no, both, only X1 and only X2 as extra regressors by least
/// squares and returns the coefficient on A of each.
inline std::vector<AdjustmentEstimate> asmd_adjustment_demo(std::uint64_t seed, std::int64_t n = 100000) {
  if (n < 5) throw InvalidArgument("asmd_adjustment_demo: n must be at least 5");
  CounterRng rng(seed);
  Eigen::VectorXd a(n), x1(n), x2(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    x1(i) = rng.normal();
    x2(i) = rng.normal(a(i), 1.0);
    y(i) = a(i) + x1(i) + x2(i);
  }
  auto coefficient = [&](std::vector<const Eigen::VectorXd*> extra) {
    Eigen::MatrixXd design(n, 2 + static_cast<Eigen::Index>(extra.size()));
    design.col(0).setOnes();
    design.col(1) = a;
    for (std::size_t k = 0; k < extra.size(); ++k) design.col(2 + static_cast<Eigen::Index>(k)) = *extra[k];
    const Eigen::VectorXd beta = (design.transpose() * design).ldlt().solve(design.transpose() * y);
    return beta(1);
  };
  return {{"null", coefficient({})},
          {"full", coefficient({&x1, &x2})},
          {"x1", coefficient({&x1})},
          {"x2", coefficient({&x2})}};
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_bias_csv(const BenchmarkResult& r, std::ostream& out, bool include_runtime = true) {
  out << "replication,method,bias,ate_hat,ate_true,kept_fraction,runtime_seconds\n";
  for (const auto& run : r.runs) {
    out << run.replication << ',' << to_string(run.method) << ',';
    if (const auto b = run.bias()) out << detail::format_double(*b) << ',' << detail::format_double(*run.ate_hat);
    else out << ',';
    out << ',' << detail::format_double(run.ate_true) << ',' << detail::format_double(run.kept_fraction) << ','
        << detail::format_double(include_runtime ? run.runtime_seconds : 0.0) << '\n';
  }
}

inline void write_summary_csv(const BenchmarkResult& r, std::ostream& out) {
  out << "method,n_ok,n_failed,median_abs_bias,mean_bias,sd_bias,mean_kept_fraction\n";
  for (const auto& s : r.summary) {
    out << to_string(s.method) << ',' << s.n_ok << ',' << s.n_failed << ',' << detail::format_double(s.median_abs_bias)
        << ',' << detail::format_double(s.mean_bias) << ',' << detail::format_double(s.sd_bias) << ','
        << detail::format_double(s.mean_kept_fraction) << '\n';
  }
}

inline void write_calibration_csv(const CalibrationCurve& c, std::ostream& out) {
  out << "bin,predicted,observed,count\n";
  for (const auto& b : c.bins) {
    out << b.bin << ',' << detail::format_double(b.predicted) << ',' << detail::format_double(b.observed) << ','
        << b.count << '\n';
  }
}

inline void write_depth_bias_csv(const DepthSweepResult& s, std::ostream& out) {
  out << "depth,replication,bias,kept_fraction\n";
  for (std::size_t k = 0; k < s.depths.size(); ++k) {
    for (const auto& run : s.results[k].runs) {
      out << s.depths[k] << ',' << run.replication << ',';
      if (const auto b = run.bias()) out << detail::format_double(*b);
      out << ',' << detail::format_double(run.kept_fraction) << '\n';
    }
  }
}

inline void write_depth_asmd_csv(const DepthSweepResult& s, std::ostream& out) {
  out << "depth,replication,feature,weighted_asmd\n";
  for (std::size_t k = 0; k < s.depths.size(); ++k) {
    const auto& res = s.results[k];
    for (const auto& d : res.diagnostics) {
      for (std::size_t j = 0; j < d.weighted_asmd.size(); ++j) {
        out << s.depths[k] << ',' << d.replication << ',' << res.feature_names[j] << ','
            << detail::format_double(d.weighted_asmd[j]) << '\n';
      }
    }
  }
}

}  // namespace bicause

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bicause/dataset.hpp"
#include "bicause/errors.hpp"
#include "bicause/logistic.hpp"
#include "bicause/positivity.hpp"
#include "bicause/rng.hpp"
#include "bicause/stats.hpp"

namespace bicause {

enum class FeatureSelection {
  max_asmd,     // most imbalanced covariate
  random,       // uniform over all covariates
  combined_sq,  // argmax of normalized ASMD times normalized outcome-model importance
};

enum class Correction { holm };

inline std::string to_string(FeatureSelection m) {
  switch (m) {
    case FeatureSelection::max_asmd: return "max_asmd";
    case FeatureSelection::random: return "random";
    case FeatureSelection::combined_sq: return "combined_sq";
  }
  return "max_asmd";
}

inline FeatureSelection parse_feature_selection(std::string_view s) {
  if (s == "max_asmd" || s == "max-asmd") return FeatureSelection::max_asmd;
  if (s == "random") return FeatureSelection::random;
  if (s == "combined_sq" || s == "combined-sq" || s == "combined") return FeatureSelection::combined_sq;
  throw InvalidArgument("unknown feature selection mode '" + std::string(s) + "'");
}

inline PositivityMethod parse_positivity_method(std::string_view s) {
  if (s == "crump") return PositivityMethod::crump;
  if (s == "symmetric_prevalence" || s == "symmetric-prevalence") return PositivityMethod::symmetric_prevalence;
  throw InvalidArgument("unknown positivity method '" + std::string(s) + "'");
}

inline std::string to_string(SplitTest t) {
  switch (t) {
    case SplitTest::automatic: return "auto";
    case SplitTest::fisher: return "fisher";
    case SplitTest::chi2: return "chi2";
  }
  return "auto";
}

inline SplitTest parse_split_test(std::string_view s) {
  if (s == "auto") return SplitTest::automatic;
  if (s == "fisher") return SplitTest::fisher;
  if (s == "chi2") return SplitTest::chi2;
  throw InvalidArgument("unknown split test '" + std::string(s) + "'");
}

struct FitConfig {
  int max_depth = 5;
  double asmd_threshold = 0.10;
  std::int64_t min_treat_group_size = 2;
  std::int64_t min_leaf_population = 0;  // 0 disables the population stop
  double alpha = 0.05;
  Correction correction = Correction::holm;
  PositivityMethod positivity_method = PositivityMethod::crump;
  int crump_segments = 10000;
  double sp_alpha = 0.1;
  FeatureSelection feature_selection = FeatureSelection::max_asmd;
  std::optional<std::size_t> max_split_candidates;  // nullopt: every distinct value
  SplitTest split_test = SplitTest::automatic;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_depth < 1) throw InvalidArgument("max_depth must be at least 1");
    if (!(asmd_threshold >= 0.0)) throw InvalidArgument("asmd_threshold must be non-negative");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
    if (min_treat_group_size < 0 || min_leaf_population < 0) throw InvalidArgument("size thresholds must be non-negative");
    if (crump_segments < 2) throw InvalidArgument("crump_segments must be at least 2");
    if (!(sp_alpha >= 0.0 && sp_alpha < 0.5)) throw InvalidArgument("sp_alpha must lie in [0, 0.5)");
    if (max_split_candidates && *max_split_candidates == 0) throw InvalidArgument("max_split_candidates must be positive");
  }
};

struct Split {
  std::size_t feature_index = 0;
  std::string feature_name;
  double value = 0.0;  // rows with x <= value go left
  double p_raw = 1.0;
  double log_p_raw = 0.0;
  std::optional<double> p_adjusted;
  double asmd = 0.0;
};

struct LeafEstimate {
  std::optional<double> mean_treated;
  std::optional<double> mean_control;
  std::optional<double> effect;
  double prevalence = 0.0;
  std::optional<LogisticModel> propensity_model;
  std::string propensity_model_status;  // ok | single_arm | too_few_rows | not_converged
};

struct Node {
  int id = 0;
  int depth = 0;
  std::int64_t n = 0;
  std::int64_t n_treated = 0;
  std::int64_t n_control = 0;
  std::optional<Split> split;
  std::optional<std::array<int, 2>> children;
  bool is_violating = false;
  std::optional<LeafEstimate> leaf_estimate;

  bool is_leaf() const { return !children.has_value(); }
  double prevalence() const { return n > 0 ? static_cast<double>(n_treated) / static_cast<double>(n) : 0.0; }
};

struct FitMetadata {
  std::size_t n_train = 0;
  std::vector<std::string> feature_names;
  std::string timestamp;  // empty unless the caller stamps it
};

/// Binary partition of the covariate space. nodes[id].id == id, root is 0.
struct Tree {
  std::vector<Node> nodes;
  FitConfig config;
  FitMetadata metadata;
  std::optional<Cutoffs> cutoffs;

  const Node& root() const { return nodes.at(0); }
  const Node& node(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes.size()) throw InvalidArgument("unknown node id " + std::to_string(id));
    return nodes[static_cast<std::size_t>(id)];
  }
  std::size_t num_features() const { return metadata.feature_names.size(); }

  std::vector<int> leaf_ids() const {
    std::vector<int> out;
    for (const auto& nd : nodes) {
      if (nd.is_leaf()) out.push_back(nd.id);
    }
    return out;
  }
  std::size_t num_leaves() const { return leaf_ids().size(); }
  int depth() const {
    int d = 0;
    for (const auto& nd : nodes) d = std::max(d, nd.depth);
    return d;
  }
  std::vector<int> violating_leaf_ids() const {
    std::vector<int> out;
    for (const auto& nd : nodes) {
      if (nd.is_leaf() && nd.is_violating) out.push_back(nd.id);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// feature and split selection

struct FeatureChoice {
  std::size_t index = 0;
  double score = 0.0;
  std::vector<double> asmd;  // per feature, on the rows considered
};

struct SplitChoice {
  double value = 0.0;
  double p = 1.0;
  double log_p = 0.0;
  Table2x2 table;
};

namespace detail {

inline std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

inline std::pair<std::int64_t, std::int64_t> arm_counts(const Dataset& ds, std::span<const std::size_t> rows) {
  std::int64_t treated = 0;
  for (const auto r : rows) treated += ds.treatment()[r];
  return {treated, static_cast<std::int64_t>(rows.size()) - treated};
}

inline std::vector<double> feature_asmds(const Dataset& ds, std::span<const std::size_t> rows) {
  const std::size_t d = ds.num_features();
  std::vector<double> out(d, 0.0);
  std::vector<double> xt, xc;
  xt.reserve(rows.size());
  xc.reserve(rows.size());
  for (std::size_t j = 0; j < d; ++j) {
    xt.clear();
    xc.clear();
    const auto col = ds.column(j);
    for (const auto r : rows) (ds.treatment()[r] ? xt : xc).push_back(col[r]);
    out[j] = asmd(xt, xc);
  }
  return out;
}

inline bool is_constant(const Dataset& ds, std::span<const std::size_t> rows, std::size_t feature) {
  if (rows.empty()) return true;
  const auto col = ds.column(feature);
  const double first = col[rows.front()];
  return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return col[r] == first; });
}

// Outcome-model importance |coef_j| on standardized covariates, with the
// treatment indicator as an extra regressor. Constant covariates get 0.
inline std::vector<double> outcome_importance(const Dataset& ds, std::span<const std::size_t> rows) {
  const std::size_t d = ds.num_features();
  std::vector<double> q(d, 0.0);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < d; ++j) {
    if (!is_constant(ds, rows, j)) active.push_back(j);
  }
  if (active.empty()) return q;

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd x(n, k + 1);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto col = ds.column(active[static_cast<std::size_t>(c)]);
    for (Eigen::Index i = 0; i < n; ++i) x(i, c) = col[rows[static_cast<std::size_t>(i)]];
    const double mean = x.col(c).mean();
    const double sd = std::sqrt((x.col(c).array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)));
    x.col(c) = (x.col(c).array() - mean) / sd;
  }
  bool binary = true;
  Eigen::VectorXd y(n);
  std::vector<Treatment> y_binary(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    x(i, k) = ds.treatment()[r];
    y(i) = ds.outcome()[r];
    if (y(i) != 0.0 && y(i) != 1.0) binary = false;
    y_binary[static_cast<std::size_t>(i)] = static_cast<Treatment>(y(i) == 1.0);
  }

  Eigen::VectorXd coef;
  const auto n_pos = std::count(y_binary.begin(), y_binary.end(), Treatment{1});
  if (binary && n_pos > 0 && n_pos < n && n > k + 2) {
    const auto fit = fit_logistic(x, y_binary);
    if (fit.converged) coef = fit.model.coef;
  } else if (!binary && n > k + 2) {
    Eigen::MatrixXd design(n, k + 2);
    design.col(0).setOnes();
    design.rightCols(k + 1) = x;
    coef = design.completeOrthogonalDecomposition().solve(y).tail(k + 1);
  }
  if (coef.size() == 0 || !coef.allFinite()) {
    for (const auto j : active) q[j] = 1.0;
    return q;
  }
  for (Eigen::Index c = 0; c < k; ++c) q[active[static_cast<std::size_t>(c)]] = std::abs(coef(c));
  return q;
}

}  // namespace detail

/// Picks the covariate to split on among `rows`. Ties go to the lowest index;
/// an infinite ASMD outranks every finite one.
inline FeatureChoice select_feature(const Dataset& ds, std::span<const std::size_t> rows, FeatureSelection mode,
                                    CounterRng& rng) {
  if (ds.num_features() == 0) throw InvalidArgument("select_feature: dataset has no features");
  const auto [treated, control] = detail::arm_counts(ds, rows);
  if (treated == 0 || control == 0) throw InvalidArgument("select_feature: empty treatment group");

  FeatureChoice out;
  out.asmd = detail::feature_asmds(ds, rows);
  const std::size_t d = out.asmd.size();
  switch (mode) {
    case FeatureSelection::max_asmd: {
      out.index = static_cast<std::size_t>(std::max_element(out.asmd.begin(), out.asmd.end()) - out.asmd.begin());
      out.score = out.asmd[out.index];
      break;
    }
    case FeatureSelection::random: {
      out.index = static_cast<std::size_t>(rng.below(d));
      out.score = out.asmd[out.index];
      break;
    }
    case FeatureSelection::combined_sq: {
      std::vector<double> s = out.asmd;
      if (std::any_of(s.begin(), s.end(), [](double v) { return std::isinf(v); })) {
        for (auto& v : s) v = std::isinf(v) ? 1.0 : 0.0;
      }
      std::vector<double> q = detail::outcome_importance(ds, rows);
      auto normalize = [](std::vector<double>& v) {
        const double total = std::accumulate(v.begin(), v.end(), 0.0);
        if (total > 0.0) {
          for (auto& x : v) x /= total;
        }
      };
      normalize(s);
      normalize(q);
      double best = -1.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double score = s[j] * q[j];
        if (score > best) {
          best = score;
          out.index = j;
        }
      }
      out.score = best;
      break;
    }
  }
  return out;
}

inline FeatureChoice select_feature(const Dataset& ds, FeatureSelection mode, CounterRng& rng) {
  const auto rows = detail::all_rows(ds);
  return select_feature(ds, rows, mode, rng);
}

/// Best cut of `feature` among `rows`: the candidate value with the smallest
/// split-test p-value for treatment x (x <= value). Candidates whose children
/// would hold fewer than min_treat_group_size treated or control units are
/// skipped; returns nullopt if none remains.
inline std::optional<SplitChoice> select_split_value(const Dataset& ds, std::span<const std::size_t> rows,
                                                     std::size_t feature, const FitConfig& cfg) {
  if (feature >= ds.num_features()) throw InvalidArgument("select_split_value: feature index out of range");
  const auto col = ds.column(feature);
  std::vector<std::pair<double, Treatment>> points;
  points.reserve(rows.size());
  for (const auto r : rows) points.emplace_back(col[r], ds.treatment()[r]);
  std::sort(points.begin(), points.end());

  // distinct values with cumulative arm counts at (x <= value)
  std::vector<double> values;
  std::vector<std::int64_t> cum_treated, cum_control, cum_total;
  std::int64_t treated = 0, control = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    (points[i].second ? treated : control) += 1;
    if (i + 1 == points.size() || points[i + 1].first != points[i].first) {
      values.push_back(points[i].first);
      cum_treated.push_back(treated);
      cum_control.push_back(control);
      cum_total.push_back(treated + control);
    }
  }
  if (values.size() < 2) throw InvalidArgument("select_split_value: feature is constant");

  std::vector<std::size_t> candidates;
  const std::size_t n_cuts = values.size() - 1;
  if (cfg.max_split_candidates && n_cuts > *cfg.max_split_candidates) {
    const std::size_t k_max = *cfg.max_split_candidates;
    const auto n = static_cast<std::int64_t>(points.size());
    for (std::size_t k = 1; k <= k_max; ++k) {
      // distinct value holding the empirical k/(k_max+1) quantile
      const auto rank = static_cast<std::int64_t>(std::ceil(static_cast<double>(k) * static_cast<double>(n) /
                                                            static_cast<double>(k_max + 1)));
      const auto pos = static_cast<std::size_t>(std::lower_bound(cum_total.begin(), cum_total.end(), std::max<std::int64_t>(rank, 1)) -
                                                cum_total.begin());
      if (pos < n_cuts && (candidates.empty() || candidates.back() != pos)) candidates.push_back(pos);
    }
  } else {
    candidates.resize(n_cuts);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  }

  const std::int64_t m = cfg.min_treat_group_size;
  std::optional<SplitChoice> best;
  for (const auto pos : candidates) {
    Table2x2 t;
    t.a = cum_control[pos];
    t.b = control - t.a;
    t.c = cum_treated[pos];
    t.d = treated - t.c;
    if (std::min(t.a, t.c) < m || std::min(t.b, t.d) < m) continue;
    const double log_p = split_log_p_value(t, cfg.split_test);
    if (!best || log_p < best->log_p) best = SplitChoice{values[pos], std::exp(log_p), log_p, t};
  }
  return best;
}

inline std::optional<SplitChoice> select_split_value(const Dataset& ds, std::size_t feature, const FitConfig& cfg) {
  const auto rows = detail::all_rows(ds);
  return select_split_value(ds, rows, feature, cfg);
}

// ---------------------------------------------------------------------------
// growing, pruning, positivity

namespace detail {

class TreeGrower {
 public:
  TreeGrower(const Dataset& ds, const FitConfig& cfg) : ds_(ds), cfg_(cfg), rng_(cfg.seed) {}

  std::vector<Node> grow(std::vector<std::size_t> rows) {
    nodes_.clear();
    build(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int build(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    {
      Node& nd = nodes_.back();
      nd.id = id;
      nd.depth = depth;
      nd.n = static_cast<std::int64_t>(rows.size());
      std::tie(nd.n_treated, nd.n_control) = arm_counts(ds_, rows);
    }
    auto split = find_split(rows, nodes_[static_cast<std::size_t>(id)]);
    if (!split) return id;

    std::vector<std::size_t> left, right;
    const auto col = ds_.column(split->feature_index);
    for (const auto r : rows) (col[r] <= split->value ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    nodes_[static_cast<std::size_t>(id)].split = std::move(split);
    const int left_id = build(std::move(left), depth + 1);
    const int right_id = build(std::move(right), depth + 1);
    nodes_[static_cast<std::size_t>(id)].children = std::array<int, 2>{left_id, right_id};
    return id;
  }

  std::optional<Split> find_split(const std::vector<std::size_t>& rows, const Node& nd) {
    if (nd.depth >= cfg_.max_depth) return std::nullopt;
    if (nd.n < cfg_.min_leaf_population) return std::nullopt;
    if (std::min(nd.n_treated, nd.n_control) < std::max<std::int64_t>(cfg_.min_treat_group_size, 1)) return std::nullopt;

    const FeatureChoice choice = select_feature(ds_, rows, cfg_.feature_selection, rng_);
    const double max_asmd = *std::max_element(choice.asmd.begin(), choice.asmd.end());
    if (max_asmd < cfg_.asmd_threshold) return std::nullopt;
    if (is_constant(ds_, rows, choice.index)) return std::nullopt;

    const auto cut = select_split_value(ds_, rows, choice.index, cfg_);
    if (!cut) return std::nullopt;
    Split s;
    s.feature_index = choice.index;
    s.feature_name = ds_.feature_names()[choice.index];
    s.value = cut->value;
    s.p_raw = cut->p;
    s.log_p_raw = cut->log_p;
    s.asmd = choice.asmd[choice.index];
    return s;
  }

  const Dataset& ds_;
  const FitConfig& cfg_;
  CounterRng rng_;
  std::vector<Node> nodes_;
};

// Copies the subtree at `old_id` into `out` in preorder, collapsing every
// split for which keep[id] is false.
inline int copy_pruned(const std::vector<Node>& old_nodes, int old_id, const std::vector<bool>& keep,
                       const std::vector<double>& adjusted, std::vector<Node>& out) {
  const int id = static_cast<int>(out.size());
  Node nd = old_nodes[static_cast<std::size_t>(old_id)];
  nd.id = id;
  nd.children.reset();
  if (!keep[static_cast<std::size_t>(old_id)]) {
    nd.split.reset();
    out.push_back(std::move(nd));
    return id;
  }
  nd.split->p_adjusted = adjusted[static_cast<std::size_t>(old_id)];
  out.push_back(std::move(nd));
  const auto& old_children = *old_nodes[static_cast<std::size_t>(old_id)].children;
  const int left = copy_pruned(old_nodes, old_children[0], keep, adjusted, out);
  const int right = copy_pruned(old_nodes, old_children[1], keep, adjusted, out);
  out[static_cast<std::size_t>(id)].children = std::array<int, 2>{left, right};
  return id;
}

}  // namespace detail

/// Grows the unpruned tree on `rows` (all rows when empty).
inline Tree grow_tree(const Dataset& ds, const FitConfig& cfg, std::vector<std::size_t> rows = {}) {
  cfg.validate();
  if (rows.empty()) rows = detail::all_rows(ds);
  Tree tree;
  tree.config = cfg;
  tree.metadata.n_train = rows.size();
  tree.metadata.feature_names = ds.feature_names();
  detail::TreeGrower grower(ds, cfg);
  tree.nodes = grower.grow(std::move(rows));
  return tree;
}

/// Corrects the raw p-values of every split jointly, then keeps a split iff it
/// is significant after correction or some descendant split is kept.
inline Tree prune(const Tree& grown, double alpha, Correction correction = Correction::holm) {
  std::vector<int> internal;
  std::vector<double> p;
  for (const auto& nd : grown.nodes) {
    if (nd.split) {
      internal.push_back(nd.id);
      p.push_back(nd.split->p_raw);
    }
  }
  Tree out = grown;
  if (internal.empty()) return out;

  CorrectionResult corrected;
  switch (correction) {
    case Correction::holm:
      corrected = holm_bonferroni(p, alpha);
      break;
  }
  std::vector<bool> rejected(grown.nodes.size(), false);
  std::vector<double> adjusted(grown.nodes.size(), 1.0);
  for (std::size_t k = 0; k < internal.size(); ++k) {
    rejected[static_cast<std::size_t>(internal[k])] = corrected.reject[k];
    adjusted[static_cast<std::size_t>(internal[k])] = corrected.adjusted_p[k];
  }

  // children always carry larger ids than their parent, so a reverse sweep is bottom-up
  std::vector<bool> keep(grown.nodes.size(), false);
  for (auto it = grown.nodes.rbegin(); it != grown.nodes.rend(); ++it) {
    if (it->is_leaf()) continue;
    const auto& ch = *it->children;
    keep[static_cast<std::size_t>(it->id)] = rejected[static_cast<std::size_t>(it->id)] ||
                                             keep[static_cast<std::size_t>(ch[0])] ||
                                             keep[static_cast<std::size_t>(ch[1])];
  }

  out.nodes.clear();
  detail::copy_pruned(grown.nodes, 0, keep, adjusted, out.nodes);
  return out;
}

/// Root-to-leaf descent; x[feature] <= value goes left.
inline int assign_leaf(const Tree& tree, std::span<const double> x) {
  if (x.size() != tree.num_features()) {
    throw InvalidArgument("assign_leaf: row has " + std::to_string(x.size()) + " features, tree expects " +
                          std::to_string(tree.num_features()));
  }
  int id = 0;
  for (;;) {
    const Node& nd = tree.nodes[static_cast<std::size_t>(id)];
    if (nd.is_leaf()) return id;
    id = x[nd.split->feature_index] <= nd.split->value ? (*nd.children)[0] : (*nd.children)[1];
  }
}

inline int assign_leaf(const Tree& tree, const Dataset& ds, std::size_t row) {
  if (ds.num_features() != tree.num_features()) {
    throw InvalidArgument("assign_leaf: dataset has " + std::to_string(ds.num_features()) + " features, tree expects " +
                          std::to_string(tree.num_features()));
  }
  int id = 0;
  for (;;) {
    const Node& nd = tree.nodes[static_cast<std::size_t>(id)];
    if (nd.is_leaf()) return id;
    id = ds.feature(row, nd.split->feature_index) <= nd.split->value ? (*nd.children)[0] : (*nd.children)[1];
  }
}

/// Leaf id of every row of `ds`.
inline std::vector<int> assign_leaves(const Tree& tree, const Dataset& ds) {
  std::vector<int> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = assign_leaf(tree, ds, i);
  return out;
}

/// Flags leaves whose treatment prevalence falls outside the overlap cutoffs.
/// The cutoffs are computed from per-sample leaf prevalences of the fitting rows.
inline Tree mark_positivity(const Tree& pruned, PositivityMethod method) {
  Tree out = pruned;
  std::vector<double> propensities;
  std::int64_t n = 0, n_treated = 0;
  for (const auto& nd : out.nodes) {
    if (!nd.is_leaf()) continue;
    propensities.insert(propensities.end(), static_cast<std::size_t>(nd.n), nd.prevalence());
    n += nd.n;
    n_treated += nd.n_treated;
  }
  Cutoffs cut;
  if (method == PositivityMethod::crump) {
    cut = crump_cutoffs(propensities, out.config.crump_segments);
  } else {
    cut = symmetric_prevalence_cutoffs(static_cast<double>(n_treated) / static_cast<double>(n), out.config.sp_alpha);
  }
  for (auto& nd : out.nodes) nd.is_violating = nd.is_leaf() && !cut.contains(nd.prevalence());
  out.cutoffs = cut;
  return out;
}

namespace detail {

inline LeafEstimate estimate_leaf(const Dataset& ds, std::span<const std::size_t> rows) {
  LeafEstimate est;
  double sum_t = 0.0, sum_c = 0.0;
  std::size_t n_t = 0, n_c = 0;
  for (const auto r : rows) {
    if (ds.treatment()[r]) {
      sum_t += ds.outcome()[r];
      ++n_t;
    } else {
      sum_c += ds.outcome()[r];
      ++n_c;
    }
  }
  if (n_t > 0) est.mean_treated = sum_t / static_cast<double>(n_t);
  if (n_c > 0) est.mean_control = sum_c / static_cast<double>(n_c);
  if (n_t > 0 && n_c > 0) est.effect = *est.mean_treated - *est.mean_control;
  est.prevalence = rows.empty() ? 0.0 : static_cast<double>(n_t) / static_cast<double>(rows.size());

  if (n_t == 0 || n_c == 0) {
    est.propensity_model_status = "single_arm";
    return est;
  }
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < ds.num_features(); ++j) {
    if (!is_constant(ds, rows, j)) active.push_back(j);
  }
  if (rows.size() <= active.size() + 1) {
    est.propensity_model_status = "too_few_rows";
    return est;
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(active.size()));
  std::vector<Treatment> t(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < active.size(); ++c) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = ds.feature(rows[i], active[c]);
    }
    t[i] = ds.treatment()[rows[i]];
  }
  const auto fit = fit_logistic(x, t);
  if (!fit.converged) {
    est.propensity_model_status = "not_converged";
    return est;
  }
  LogisticModel model;
  model.intercept = fit.model.intercept;
  model.coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.num_features()));
  for (std::size_t c = 0; c < active.size(); ++c) {
    model.coef(static_cast<Eigen::Index>(active[c])) = fit.model.coef(static_cast<Eigen::Index>(c));
  }
  est.propensity_model = std::move(model);
  est.propensity_model_status = "ok";
  return est;
}

}  // namespace detail

/// Arm means, prevalence and a leaf propensity model for every leaf, from the
/// fitting rows.
inline Tree estimate_leaves(const Tree& tree, const Dataset& ds) {
  Tree out = tree;
  std::vector<std::vector<std::size_t>> members(out.nodes.size());
  for (std::size_t i = 0; i < ds.size(); ++i) members[static_cast<std::size_t>(assign_leaf(out, ds, i))].push_back(i);
  for (auto& nd : out.nodes) {
    nd.leaf_estimate.reset();
    if (nd.is_leaf()) nd.leaf_estimate = detail::estimate_leaf(ds, members[static_cast<std::size_t>(nd.id)]);
  }
  return out;
}

/// Grow, prune, flag positivity violations, estimate leaves.
inline Tree fit(const Dataset& ds, const FitConfig& cfg) {
  cfg.validate();
  if (ds.size() == 0) throw DataError("cannot fit on an empty dataset");
  if (ds.num_treated() == 0 || ds.num_control() == 0) {
    throw DataError("dataset has a single treatment arm (" + std::to_string(ds.num_treated()) + " treated, " +
                    std::to_string(ds.num_control()) + " control)");
  }
  Tree tree = grow_tree(ds, cfg);
  tree = prune(tree, cfg.alpha, cfg.correction);
  tree = mark_positivity(tree, cfg.positivity_method);
  return estimate_leaves(tree, ds);
}

// ---------------------------------------------------------------------------
// explanation

struct Predicate {
  std::size_t feature_index = 0;
  std::string feature_name;
  bool less_equal = true;  // x <= value, else x > value
  double value = 0.0;

  std::string to_string() const {
    return feature_name + (less_equal ? " <= " : " > ") + detail::format_double(value);
  }
  bool holds(std::span<const double> x) const {
    return less_equal ? x[feature_index] <= value : x[feature_index] > value;
  }
};

struct LeafExplanation {
  int leaf_id = 0;
  std::vector<Predicate> rules;  // root to leaf
  std::int64_t n = 0;
  std::int64_t n_treated = 0;
  std::int64_t n_control = 0;
  double prevalence = 0.0;
  bool violating = false;

  std::string rule_text() const {
    if (rules.empty()) return "TRUE";
    std::string out;
    for (std::size_t i = 0; i < rules.size(); ++i) {
      if (i > 0) out += " AND ";
      out += rules[i].to_string();
    }
    return out;
  }
};

inline LeafExplanation explain_path(const Tree& tree, int leaf_id) {
  const Node& target = tree.node(leaf_id);
  std::vector<int> parent(tree.nodes.size(), -1);
  for (const auto& nd : tree.nodes) {
    if (nd.children) {
      parent[static_cast<std::size_t>((*nd.children)[0])] = nd.id;
      parent[static_cast<std::size_t>((*nd.children)[1])] = nd.id;
    }
  }
  LeafExplanation out;
  out.leaf_id = leaf_id;
  out.n = target.n;
  out.n_treated = target.n_treated;
  out.n_control = target.n_control;
  out.prevalence = target.prevalence();
  out.violating = target.is_violating;
  for (int child = leaf_id, up = parent[static_cast<std::size_t>(leaf_id)]; up >= 0;
       child = up, up = parent[static_cast<std::size_t>(up)]) {
    const Node& p = tree.nodes[static_cast<std::size_t>(up)];
    out.rules.push_back(Predicate{p.split->feature_index, p.split->feature_name, (*p.children)[0] == child, p.split->value});
  }
  std::reverse(out.rules.begin(), out.rules.end());
  return out;
}

}  // namespace bicause

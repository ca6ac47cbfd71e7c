#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bicause/dataset.hpp"
#include "bicause/errors.hpp"
#include "bicause/logistic.hpp"
#include "bicause/tree.hpp"

namespace bicause {

enum class LeafEstimator { marginal, ipw };

inline LeafEstimator parse_leaf_estimator(std::string_view s) {
  if (s == "marginal") return LeafEstimator::marginal;
  if (s == "ipw") return LeafEstimator::ipw;
  throw InvalidArgument("unknown leaf estimator '" + std::string(s) + "'");
}

struct PropensityClip {
  double lo = 0.001;
  double hi = 0.999;
};

struct LeafEffect {
  int leaf_id = 0;
  std::int64_t n_test = 0;
  double effect = 0.0;
  double mu1 = 0.0;
  double mu0 = 0.0;
  bool fallback = false;  // IPW requested, leaf-marginal used
};

struct EffectReport {
  std::string method;
  double ate = 0.0;
  std::vector<LeafEffect> per_leaf;
  double kept_fraction = 1.0;
  std::size_t n_total = 0;
  std::size_t n_kept = 0;
  std::vector<RowId> excluded_row_ids;
  std::vector<std::string> warnings;
  int fallback_count = 0;
  int clipped_count = 0;
};

struct PropensityReport {
  std::vector<double> values;
  std::string source;  // tree-prevalence | logistic
};

namespace detail {

struct ArmMeans {
  double mu1 = 0.0;
  double mu0 = 0.0;
  std::size_t n1 = 0;
  std::size_t n0 = 0;
};

inline ArmMeans arm_means(const Dataset& ds, std::span<const std::size_t> rows) {
  ArmMeans m;
  double s1 = 0.0, s0 = 0.0;
  for (const auto r : rows) {
    if (ds.treatment()[r]) {
      s1 += ds.outcome()[r];
      ++m.n1;
    } else {
      s0 += ds.outcome()[r];
      ++m.n0;
    }
  }
  if (m.n1 > 0) m.mu1 = s1 / static_cast<double>(m.n1);
  if (m.n0 > 0) m.mu0 = s0 / static_cast<double>(m.n0);
  return m;
}

// Horvitz-Thompson ratio (Hajek) means over `rows` with clipped propensities.
inline ArmMeans weighted_arm_means(const Dataset& ds, std::span<const std::size_t> rows,
                                   std::span<const double> propensity, PropensityClip clip, int& clipped) {
  ArmMeans m;
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = rows[k];
    double e = propensity[k];
    const double clamped = std::clamp(e, clip.lo, clip.hi);
    if (clamped != e) ++clipped;
    e = clamped;
    if (ds.treatment()[r]) {
      num1 += ds.outcome()[r] / e;
      den1 += 1.0 / e;
      ++m.n1;
    } else {
      num0 += ds.outcome()[r] / (1.0 - e);
      den0 += 1.0 / (1.0 - e);
      ++m.n0;
    }
  }
  if (m.n1 > 0) m.mu1 = num1 / den1;
  if (m.n0 > 0) m.mu0 = num0 / den0;
  return m;
}

}  // namespace detail

/// Marginal or leaf-IPW effect per non-violating leaf, averaged with test-row
/// counts as weights. Rows in violating leaves are excluded, as are leaves
/// whose test rows miss an arm.
inline EffectReport tree_ate(const Tree& tree, const Dataset& test, LeafEstimator estimator = LeafEstimator::marginal,
                             PropensityClip clip = {}) {
  EffectReport report;
  report.method = estimator == LeafEstimator::marginal ? "bicause-marginal" : "bicause-ipw";
  report.n_total = test.size();

  std::vector<std::vector<std::size_t>> members(tree.nodes.size());
  for (std::size_t i = 0; i < test.size(); ++i) members[static_cast<std::size_t>(assign_leaf(tree, test, i))].push_back(i);

  double weighted = 0.0;
  for (const auto& nd : tree.nodes) {
    if (!nd.is_leaf()) continue;
    const auto& rows = members[static_cast<std::size_t>(nd.id)];
    if (rows.empty()) continue;
    auto exclude = [&] {
      for (const auto r : rows) report.excluded_row_ids.push_back(test.row_ids()[r]);
    };
    if (nd.is_violating) {
      exclude();
      continue;
    }
    const auto plain = detail::arm_means(test, rows);
    if (plain.n1 == 0 || plain.n0 == 0) {
      report.warnings.push_back("leaf " + std::to_string(nd.id) + " excluded: test rows contain a single arm");
      exclude();
      continue;
    }
    LeafEffect le;
    le.leaf_id = nd.id;
    le.n_test = static_cast<std::int64_t>(rows.size());
    le.mu1 = plain.mu1;
    le.mu0 = plain.mu0;
    if (estimator == LeafEstimator::ipw) {
      const LogisticModel* model = nd.leaf_estimate && nd.leaf_estimate->propensity_model ? &*nd.leaf_estimate->propensity_model : nullptr;
      if (model) {
        std::vector<double> e(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) e[k] = model->predict(test.row(rows[k]));
        const auto w = detail::weighted_arm_means(test, rows, e, clip, report.clipped_count);
        le.mu1 = w.mu1;
        le.mu0 = w.mu0;
      } else {
        le.fallback = true;
        ++report.fallback_count;
      }
    }
    le.effect = le.mu1 - le.mu0;
    weighted += static_cast<double>(le.n_test) * le.effect;
    report.n_kept += rows.size();
    report.per_leaf.push_back(le);
  }
  if (report.n_kept == 0) throw DataError("no test rows fall in usable leaves");
  report.ate = weighted / static_cast<double>(report.n_kept);
  report.kept_fraction = static_cast<double>(report.n_kept) / static_cast<double>(report.n_total);
  std::sort(report.excluded_row_ids.begin(), report.excluded_row_ids.end());
  return report;
}

/// Leaf treatment prevalence of every row.
inline PropensityReport tree_propensity(const Tree& tree, const Dataset& ds) {
  PropensityReport out;
  out.source = "tree-prevalence";
  out.values.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Node& leaf = tree.nodes[static_cast<std::size_t>(assign_leaf(tree, ds, i))];
    out.values[i] = leaf.leaf_estimate ? leaf.leaf_estimate->prevalence : leaf.prevalence();
  }
  return out;
}

inline PropensityReport logistic_propensity(const LogisticModel& model, const Dataset& ds) {
  PropensityReport out;
  out.source = "logistic";
  out.values.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.values[i] = model.predict(ds.row(i));
  return out;
}

inline EffectReport marginal_ate(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto m = detail::arm_means(ds, rows);
  if (m.n1 == 0 || m.n0 == 0) throw DataError("marginal_ate: empty treatment arm");
  EffectReport report;
  report.method = "marginal";
  report.ate = m.mu1 - m.mu0;
  report.n_total = report.n_kept = ds.size();
  return report;
}

/// Inverse probability weighting with normalized (Hajek) weights.
inline EffectReport ipw_ate(const Dataset& ds, std::span<const double> propensities, PropensityClip clip = {}) {
  if (propensities.size() != ds.size()) throw InvalidArgument("ipw_ate: one propensity per row required");
  if (!(clip.lo > 0.0 && clip.hi < 1.0 && clip.lo <= clip.hi)) throw InvalidArgument("ipw_ate: clip bounds must satisfy 0 < lo <= hi < 1");
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  EffectReport report;
  report.method = "ipw";
  const auto m = detail::weighted_arm_means(ds, rows, propensities, clip, report.clipped_count);
  if (m.n1 == 0 || m.n0 == 0) throw DataError("ipw_ate: empty treatment arm");
  if (report.clipped_count > 0) report.warnings.push_back(std::to_string(report.clipped_count) + " propensities clipped");
  report.ate = m.mu1 - m.mu0;
  report.n_total = report.n_kept = ds.size();
  return report;
}

/// Logistic treatment model on all features of `train`, evaluated on `target`.
inline EffectReport ipw_lr_ate(const Dataset& train, const Dataset& target, PropensityClip clip = {},
                               const LogisticOptions& options = {}) {
  const auto fit = fit_logistic(train.features(), train.treatment(), options);
  const auto e = logistic_propensity(fit.model, target);
  auto report = ipw_ate(target, e.values, clip);
  report.method = "ipw-lr";
  if (!fit.converged) report.warnings.push_back("logistic propensity model did not converge");
  return report;
}

// ---------------------------------------------------------------------------
// matching

enum class DistanceMetric { mahalanobis, euclidean };

inline DistanceMetric parse_distance_metric(std::string_view s) {
  if (s == "mahalanobis") return DistanceMetric::mahalanobis;
  if (s == "euclidean") return DistanceMetric::euclidean;
  throw InvalidArgument("unknown distance metric '" + std::string(s) + "'");
}

namespace detail {

// Coordinates in which squared Euclidean distance equals the requested metric,
// with the Mahalanobis covariance estimated on `reference`.
inline Eigen::MatrixXd whitening(const Eigen::MatrixXd& reference, DistanceMetric metric) {
  const auto d = reference.cols();
  if (metric == DistanceMetric::euclidean) return Eigen::MatrixXd::Identity(d, d);
  if (reference.rows() < 2) throw DataError("mahalanobis matching: covariance needs at least two rows per arm; use euclidean");
  const Eigen::RowVectorXd mean = reference.colwise().mean();
  const Eigen::MatrixXd centered = reference.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(reference.rows() - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const double scale = cov.diagonal().cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success || scale <= 0.0 || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-10 * std::sqrt(scale)) {
    throw DataError("mahalanobis matching: covariance matrix is singular; use the euclidean metric");
  }
  // z = L^{-1} x, returned as the transposed map applied to row vectors
  const Eigen::MatrixXd l_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
  return l_inv.transpose();
}

}  // namespace detail

/// For every query row, the position of its nearest donor row (ties go to the
/// lowest position). The metric's covariance comes from the donors.
inline std::vector<std::size_t> nearest_neighbors(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& donors,
                                                  DistanceMetric metric) {
  if (donors.rows() == 0) throw DataError("matching: no donor rows");
  if (queries.cols() != donors.cols()) throw InvalidArgument("matching: feature arity mismatch");
  const Eigen::MatrixXd map = detail::whitening(donors, metric);
  const Eigen::MatrixXd zq = queries * map;
  const Eigen::MatrixXd zd = donors * map;
  std::vector<std::size_t> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < zq.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_j = 0;
    for (Eigen::Index j = 0; j < zd.rows(); ++j) {
      const double dist = (zd.row(j) - zq.row(i)).squaredNorm();
      if (dist < best) {
        best = dist;
        best_j = j;
      }
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best_j);
  }
  return out;
}

/// Double nearest-neighbour matching with replacement. Treated query rows
/// impute Y(0) from the closest donor control, control rows impute Y(1) from
/// the closest donor treated; ATE is the mean imputed difference over queries.
inline EffectReport matching_ate(const Dataset& query, const Dataset& donors, DistanceMetric metric = DistanceMetric::mahalanobis) {
  if (query.num_features() != donors.num_features()) throw InvalidArgument("matching: feature arity mismatch");
  std::vector<std::size_t> q1, q0, d1, d0;
  for (std::size_t i = 0; i < query.size(); ++i) (query.treatment()[i] ? q1 : q0).push_back(i);
  for (std::size_t i = 0; i < donors.size(); ++i) (donors.treatment()[i] ? d1 : d0).push_back(i);
  if (d1.empty() || d0.empty()) throw DataError("matching: empty treatment arm");
  if (query.size() == 0) throw DataError("matching: no query rows");

  auto rows_of = [](const Dataset& ds, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(ds.num_features()));
    for (std::size_t k = 0; k < idx.size(); ++k) x.row(static_cast<Eigen::Index>(k)) = ds.features().row(static_cast<Eigen::Index>(idx[k]));
    return x;
  };

  double total = 0.0;
  if (!q1.empty()) {
    const auto match = nearest_neighbors(rows_of(query, q1), rows_of(donors, d0), metric);
    for (std::size_t k = 0; k < q1.size(); ++k) total += query.outcome()[q1[k]] - donors.outcome()[d0[match[k]]];
  }
  if (!q0.empty()) {
    const auto match = nearest_neighbors(rows_of(query, q0), rows_of(donors, d1), metric);
    for (std::size_t k = 0; k < q0.size(); ++k) total += donors.outcome()[d1[match[k]]] - query.outcome()[q0[k]];
  }
  EffectReport report;
  report.method = "matching";
  report.ate = total / static_cast<double>(query.size());
  report.n_total = report.n_kept = query.size();
  return report;
}

inline EffectReport matching_ate(const Dataset& ds, DistanceMetric metric = DistanceMetric::mahalanobis) {
  return matching_ate(ds, ds, metric);
}

// ---------------------------------------------------------------------------
// report serialization

inline nlohmann::json to_json(const EffectReport& r) {
  using nlohmann::json;
  json leaves = json::array();
  for (const auto& le : r.per_leaf) {
    leaves.push_back(json{{"leaf_id", le.leaf_id}, {"n_test", le.n_test}, {"effect", le.effect},
                          {"mu1", le.mu1}, {"mu0", le.mu0}, {"fallback", le.fallback}});
  }
  return json{{"method", r.method},
              {"ate", r.ate},
              {"kept_fraction", r.kept_fraction},
              {"n_total", r.n_total},
              {"n_kept", r.n_kept},
              {"n_excluded", r.n_total - r.n_kept},
              {"per_leaf", leaves},
              {"excluded_row_ids", r.excluded_row_ids},
              {"fallback_count", r.fallback_count},
              {"clipped_count", r.clipped_count},
              {"warnings", r.warnings}};
}

inline std::string to_csv(const EffectReport& r) {
  std::ostringstream out;
  out << "method,ate,kept_fraction,n_excluded\n"
      << r.method << ',' << detail::format_double(r.ate) << ',' << detail::format_double(r.kept_fraction) << ','
      << (r.n_total - r.n_kept) << '\n';
  return out.str();
}

}  // namespace bicause

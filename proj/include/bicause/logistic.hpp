#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bicause/dataset.hpp"
#include "bicause/errors.hpp"

namespace bicause {

struct LogisticOptions {
  int max_iter = 500;
  double tol = 1e-8;
};

/// P(T = 1 | x) = sigmoid(intercept + coef . x)
struct LogisticModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;

  double linear(const Eigen::Ref<const Eigen::VectorXd>& x) const { return intercept + coef.dot(x); }
  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const double eta = linear(x);
    return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
  }
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict(Eigen::VectorXd(x.row(i).transpose()));
    return out;
  }
};

struct LogisticFit {
  LogisticModel model;
  bool converged = false;
  bool separated = false;
  int iterations = 0;
  std::vector<double> log_likelihood;  // one entry per accepted iterate, starting with the initial point
};

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  return design;
}

inline double bernoulli_log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& t,
                                       const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += t(i) * eta(i) - softplus(eta(i));
  return ll;
}

}  // namespace detail

/// Gradient of the Bernoulli log-likelihood, intercept first.
inline Eigen::VectorXd logistic_score(const Eigen::MatrixXd& x, std::span<const Treatment> t,
                                      const LogisticModel& model) {
  const Eigen::MatrixXd design = detail::with_intercept(x);
  Eigen::VectorXd beta(design.cols());
  beta(0) = model.intercept;
  beta.tail(model.coef.size()) = model.coef;
  const Eigen::VectorXd eta = design * beta;
  Eigen::VectorXd residual(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) residual(i) = t[static_cast<std::size_t>(i)] - detail::sigmoid(eta(i));
  return design.transpose() * residual;
}

/// Unpenalized maximum-likelihood logistic regression by iteratively
/// reweighted least squares with step-halving. Converged when the largest
/// coefficient change drops below tol.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& x, std::span<const Treatment> t,
                                const LogisticOptions& options = {}) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (static_cast<std::size_t>(n) != t.size()) throw InvalidArgument("fit_logistic: row count mismatch");
  if (n <= d) throw InvalidArgument("fit_logistic: need more rows than features");
  const auto n_treated = std::count(t.begin(), t.end(), Treatment{1});
  if (n_treated == 0 || n_treated == n) throw InvalidArgument("fit_logistic: both classes must be present");

  const Eigen::MatrixXd design = detail::with_intercept(x);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) target(i) = t[static_cast<std::size_t>(i)];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
  const double prevalence = static_cast<double>(n_treated) / static_cast<double>(n);
  beta(0) = std::log(prevalence / (1.0 - prevalence));

  LogisticFit fit;
  double ll = detail::bernoulli_log_likelihood(design, target, beta);
  fit.log_likelihood.push_back(ll);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    fit.iterations = iter;
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd weights(n), residual(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = detail::sigmoid(eta(i));
      weights(i) = p * (1.0 - p);
      residual(i) = target(i) - p;
    }
    const Eigen::VectorXd gradient = design.transpose() * residual;
    const Eigen::MatrixXd hessian = design.transpose() * weights.asDiagonal() * design;

    Eigen::VectorXd step;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(gradient);
    if (step.size() == 0 || !step.allFinite() || (hessian * step - gradient).norm() > 1e-6 * (1.0 + gradient.norm())) {
      step = hessian.completeOrthogonalDecomposition().solve(gradient);
    }
    if (!step.allFinite()) break;

    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double candidate_ll = detail::bernoulli_log_likelihood(design, target, candidate);
    while (candidate_ll < ll && scale > 1e-10) {
      scale *= 0.5;
      candidate = beta + scale * step;
      candidate_ll = detail::bernoulli_log_likelihood(design, target, candidate);
    }
    if (candidate_ll < ll) break;  // no ascent direction left

    const double change = (scale * step).cwiseAbs().maxCoeff();
    beta = candidate;
    ll = candidate_ll;
    fit.log_likelihood.push_back(ll);
    if (ll > -1e-9 * static_cast<double>(n)) {
      // fitted probabilities have collapsed onto the labels
      fit.separated = true;
      break;
    }
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.model.intercept = beta(0);
  fit.model.coef = beta.tail(d);
  if (!fit.model.coef.allFinite() || !std::isfinite(fit.model.intercept)) fit.converged = false;
  return fit;
}

}  // namespace bicause

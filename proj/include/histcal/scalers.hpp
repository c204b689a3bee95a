#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "histcal/errors.hpp"
#include "histcal/format.hpp"
#include "histcal/stats.hpp"

namespace histcal {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

/// sigmoid(w . x + b).
struct LinearScorer {
  Eigen::VectorXd weights;
  double intercept = 0.0;

  double linear(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return x.dot(weights) + intercept;
  }
  double apply(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return sigmoid(linear(x)); }

  std::vector<double> apply_all(const Eigen::MatrixXd& features) const {
    std::vector<double> out(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      out[static_cast<std::size_t>(i)] = apply(features.row(i));
    }
    return out;
  }
};

/// Platt scaler: sigmoid(a * s + b).
struct SigmoidScaler {
  double a = 1.0;
  double b = 0.0;

  double apply(double s) const { return sigmoid(a * s + b); }

  std::vector<double> apply_all(std::span<const double> scores) const {
    std::vector<double> out(scores.size());
    std::transform(scores.begin(), scores.end(), out.begin(), [this](double s) { return apply(s); });
    return out;
  }
};

template <class Model>
struct FitResult {
  Model model;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;        // infinity norm at the returned parameters
  std::vector<double> log_likelihood;  // one entry per iterate, starting at zero weights
};

using LogisticFit = FitResult<LinearScorer>;
using PlattFit = FitResult<SigmoidScaler>;

/// Bernoulli log-likelihood of labels under sigmoid([X 1] theta).
inline double log_likelihood(const Eigen::MatrixXd& features, std::span<const int> labels,
                             const Eigen::VectorXd& theta) {
  const Eigen::Index d = features.cols();
  CompensatedSum ll;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double z = features.row(i).dot(theta.head(d)) + theta(d);
    ll.add(labels[static_cast<std::size_t>(i)] ? -softplus(-z) : -softplus(z));
  }
  return ll.value();
}

/// Gradient of `log_likelihood` with respect to theta = (w, b).
inline Eigen::VectorXd log_likelihood_gradient(const Eigen::MatrixXd& features,
                                               std::span<const int> labels,
                                               const Eigen::VectorXd& theta) {
  const Eigen::Index d = features.cols();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d + 1);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double z = features.row(i).dot(theta.head(d)) + theta(d);
    const double r = labels[static_cast<std::size_t>(i)] - sigmoid(z);
    g.head(d) += r * features.row(i).transpose();
    g(d) += r;
  }
  return g;
}

/// Unregularized maximum-likelihood logistic regression by damped Newton.
///
/// Falls back to a gradient step when the curvature matrix is not positive
/// definite. A step is accepted when the log-likelihood does not decrease;
/// near the optimum, where the gain drops below the rounding resolution of
/// the sum, a step that reduces the gradient norm is also accepted if the
/// likelihood moves by no more than that resolution. Reports
/// `converged` only when the gradient infinity norm is within `tol` and the
/// fitted hyperplane does not strictly separate the classes (in which case
/// no maximizer exists).
inline LogisticFit fit_logistic(const Eigen::MatrixXd& features, std::span<const int> labels,
                                int max_iters = 100, double tol = 1e-8) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n == 0) throw data_error("logistic regression needs at least one sample");
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw data_error("feature rows and labels differ in count");
  }
  if (!features.allFinite()) throw data_error("features contain non-finite values");
  for (int y : labels) {
    if (y != 0 && y != 1) throw data_error("labels must be 0 or 1");
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  LogisticFit fit;
  double ll = log_likelihood(features, labels, theta);
  fit.log_likelihood.push_back(ll);
  Eigen::VectorXd grad = log_likelihood_gradient(features, labels, theta);

  for (int iter = 0; iter < max_iters; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() <= tol) break;

    Eigen::MatrixXd curvature = Eigen::MatrixXd::Zero(d + 1, d + 1);
    Eigen::RowVectorXd row(d + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      row.head(d) = features.row(i);
      row(d) = 1.0;
      const double p = sigmoid(row.dot(theta));
      curvature.noalias() += p * (1.0 - p) * row.transpose() * row;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(curvature);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0).all()) {
      step = ldlt.solve(grad);
    }
    if (step.size() == 0 || !step.allFinite()) step = grad / static_cast<double>(n);

    // Every term of the sum is nonpositive, so |ll| bounds its rounding error scale.
    const double resolution = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(ll);
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const Eigen::VectorXd candidate = theta + t * step;
      const double cand_ll = log_likelihood(features, labels, candidate);
      if (!std::isfinite(cand_ll)) continue;
      bool take = cand_ll >= ll;
      Eigen::VectorXd cand_grad;
      if (!take && cand_ll >= ll - resolution) {
        cand_grad = log_likelihood_gradient(features, labels, candidate);
        take = cand_grad.lpNorm<Eigen::Infinity>() < grad.lpNorm<Eigen::Infinity>();
      }
      if (take) {
        theta = candidate;
        ll = cand_ll;
        grad = cand_grad.size() ? cand_grad : log_likelihood_gradient(features, labels, theta);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    fit.log_likelihood.push_back(ll);
    fit.iterations = iter + 1;
  }

  fit.model.weights = theta.head(d);
  fit.model.intercept = theta(d);
  fit.gradient_norm = grad.lpNorm<Eigen::Infinity>();

  bool separates = true;
  for (Eigen::Index i = 0; i < n && separates; ++i) {
    const double z = fit.model.linear(features.row(i));
    separates = labels[static_cast<std::size_t>(i)] ? z > 0.0 : z < 0.0;
  }
  fit.converged = fit.gradient_norm <= tol && !separates;
  return fit;
}

/// Platt scaling: logistic regression on the score as the only feature.
inline PlattFit fit_platt(std::span<const double> scores, std::span<const int> labels,
                          int max_iters = 100, double tol = 1e-8) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(scores.size()), 1);
  for (std::size_t i = 0; i < scores.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = scores[i];
  const auto lr = fit_logistic(x, labels, max_iters, tol);
  PlattFit fit;
  fit.model = {lr.model.weights(0), lr.model.intercept};
  fit.converged = lr.converged;
  fit.iterations = lr.iterations;
  fit.gradient_norm = lr.gradient_norm;
  fit.log_likelihood = lr.log_likelihood;
  return fit;
}

// Text formats: a kind tag line, then coefficients at full precision.
//   linear / <w_1 ... w_d> / <intercept>
//   sigmoid / <a> / <b>
inline void write_scorer(std::ostream& os, const LinearScorer& s) {
  os << "linear\n";
  for (Eigen::Index i = 0; i < s.weights.size(); ++i) os << (i ? " " : "") << exact(s.weights(i));
  os << '\n' << exact(s.intercept) << '\n';
}

inline void write_scorer(std::ostream& os, const SigmoidScaler& s) {
  os << "sigmoid\n" << exact(s.a) << '\n' << exact(s.b) << '\n';
}

inline LinearScorer read_linear_scorer(std::istream& is) {
  std::string tag, weights, intercept;
  if (!std::getline(is, tag) || trim(tag) != "linear") throw parse_error("expected 'linear' scorer");
  if (!std::getline(is, weights) || !std::getline(is, intercept)) {
    throw parse_error("truncated linear scorer");
  }
  std::vector<double> w;
  std::istringstream ws(weights);
  std::string tok;
  while (ws >> tok) w.push_back(to_double(tok, "scorer weight"));
  LinearScorer s;
  s.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  s.intercept = to_double(intercept, "scorer intercept");
  return s;
}

inline SigmoidScaler read_sigmoid_scaler(std::istream& is) {
  std::string tag, a, b;
  if (!std::getline(is, tag) || trim(tag) != "sigmoid") throw parse_error("expected 'sigmoid' scaler");
  if (!std::getline(is, a) || !std::getline(is, b)) throw parse_error("truncated sigmoid scaler");
  return {to_double(a, "scaler slope"), to_double(b, "scaler intercept")};
}

}  // namespace histcal

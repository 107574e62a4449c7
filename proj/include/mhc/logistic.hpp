#pragma once

// L1-penalized logistic regression by coordinate descent inside IRLS, with a
// warm-started lambda path and K-fold cross-validation on deviance.
//
// Objective on the (optionally standardized) design:
//   (1/N) sum_i [log(1 + exp(eta_i)) - y_i eta_i] + lambda * ||beta||_1,
//   eta_i = b0 + x_i' beta, intercept unpenalized.
// Each outer step is a Newton (IRLS) step solved by coordinate descent and
// then halved until the objective does not increase.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "mhc/error.hpp"
#include "mhc/rand.hpp"
#include "mhc/types.hpp"

namespace mhc {

struct LassoOptions {
  bool standardize = true;
  double tol = 1e-7;
  int max_outer = 100;
  int max_sweeps = 100000;
};

struct LogisticFit {
  double intercept = 0.0;  // original scale
  Vector coef;             // original scale
  double lambda = 0.0;
  std::vector<double> objective_trace;  // after each outer step at the final lambda
  double kkt_residual = 0.0;
  std::vector<double> path_lambdas;
  std::vector<double> cv_deviance;  // mean held-out deviance per lambda (empty without CV)
  std::size_t selected = 0;
};

namespace detail {

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

// Working design: standardized copy of X plus the scaling to undo it.
struct Design {
  Matrix X;
  Vector mean, scale;  // scale 0 marks a constant column
  Eigen::Index N() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

inline Design make_design(const Matrix& X, bool standardize) {
  Design d;
  d.X = X;
  const Eigen::Index N = X.rows(), p = X.cols();
  d.mean = Vector::Zero(p);
  d.scale = Vector::Ones(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double m = X.col(j).mean();
    const double var = (X.col(j).array() - m).square().mean();
    if (var <= 1e-24 * std::max(1.0, m * m)) {
      d.scale(j) = 0.0;
      d.X.col(j).setZero();
      continue;
    }
    if (standardize) {
      d.mean(j) = m;
      d.scale(j) = std::sqrt(var);
      d.X.col(j) = (X.col(j).array() - m) / d.scale(j);
    }
  }
  (void)N;
  return d;
}

struct LassoState {
  double b0 = 0.0;
  Vector beta;
};

inline double logistic_loss(const Matrix& X, const Vector& y, const LassoState& s) {
  const Vector eta = (X * s.beta).array() + s.b0;
  double l = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) l += softplus(eta(i)) - y(i) * eta(i);
  return l / static_cast<double>(eta.size());
}

inline double lasso_objective(const Matrix& X, const Vector& y, const LassoState& s, double lambda) {
  return logistic_loss(X, y, s) + lambda * s.beta.lpNorm<1>();
}

inline double kkt_residual(const Matrix& X, const Vector& y, const LassoState& s, double lambda) {
  const Vector eta = (X * s.beta).array() + s.b0;
  Vector r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r(i) = sigmoid(eta(i)) - y(i);
  const double N = static_cast<double>(eta.size());
  double worst = std::fabs(r.sum() / N);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double g = X.col(j).dot(r) / N;
    const double v = s.beta(j) != 0.0 ? std::fabs(g + lambda * (s.beta(j) > 0 ? 1.0 : -1.0))
                                      : std::max(0.0, std::fabs(g) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

// Minimizes the penalized objective at one lambda from the warm start in s.
inline void solve_lasso_logistic(const Matrix& X, const Vector& y, double lambda, LassoState& s,
                                 const LassoOptions& opt, std::vector<double>* trace) {
  const Eigen::Index N = X.rows(), p = X.cols();
  const double invN = 1.0 / static_cast<double>(N);
  Vector w(N), r(N), xv(p);
  std::vector<char> active(static_cast<std::size_t>(p), 0);
  double obj = lasso_objective(X, y, s, lambda);
  if (trace) trace->push_back(obj);
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const Vector eta = (X * s.beta).array() + s.b0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const double pi = sigmoid(eta(i));
      w(i) = std::max(pi * (1.0 - pi), 1e-5);
      r(i) = (y(i) - pi) / w(i);
    }
    const double wsum = w.sum();
    for (Eigen::Index j = 0; j < p; ++j) xv(j) = (w.array() * X.col(j).array().square()).sum() * invN;

    LassoState cand = s;
    // Coordinate descent on the weighted least-squares subproblem.
    bool full = true;
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
      double maxd = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (xv(j) <= 0.0) continue;
        if (!full && !active[static_cast<std::size_t>(j)]) continue;
        const double bj = cand.beta(j);
        const double g = (w.array() * X.col(j).array() * r.array()).sum() * invN + xv(j) * bj;
        const double bn = soft_threshold(g, lambda) / xv(j);
        const double d = bn - bj;
        if (d != 0.0) {
          cand.beta(j) = bn;
          r -= d * X.col(j);
          maxd = std::max(maxd, xv(j) * d * d);
          if (bn != 0.0) active[static_cast<std::size_t>(j)] = 1;
        }
      }
      const double d0 = (w.array() * r.array()).sum() / wsum;
      cand.b0 += d0;
      r.array() -= d0;
      maxd = std::max(maxd, wsum * invN * d0 * d0);
      if (maxd < opt.tol) {
        if (full) break;
        full = true;  // confirm with a pass over every coordinate
      } else {
        full = false;
      }
    }

    // Step halving keeps the true objective nonincreasing.
    double cand_obj = lasso_objective(X, y, cand, lambda);
    for (int h = 0; h < 40 && cand_obj > obj; ++h) {
      cand.b0 = 0.5 * (cand.b0 + s.b0);
      cand.beta = 0.5 * (cand.beta + s.beta);
      cand_obj = lasso_objective(X, y, cand, lambda);
    }
    if (cand_obj > obj) break;
    const double db0 = cand.b0 - s.b0;
    double change = wsum * invN * db0 * db0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double dj = cand.beta(j) - s.beta(j);
      change = std::max(change, xv(j) * dj * dj);
    }
    s = cand;
    obj = cand_obj;
    if (trace) trace->push_back(obj);
    if (change < opt.tol) break;
  }
}

inline double lambda_max(const Matrix& X, const Vector& y) {
  const double ybar = y.mean();
  double mx = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    mx = std::max(mx, std::fabs(X.col(j).dot((y.array() - ybar).matrix())) / static_cast<double>(X.rows()));
  return mx;
}

inline LassoState null_state(const Matrix& X, const Vector& y) {
  LassoState s;
  const double ybar = std::clamp(y.mean(), 1e-9, 1.0 - 1e-9);
  s.b0 = std::log(ybar / (1.0 - ybar));
  s.beta = Vector::Zero(X.cols());
  return s;
}

inline double binomial_deviance(double yi, double eta) {
  const double p = std::clamp(sigmoid(eta), 1e-5, 1.0 - 1e-5);
  return -2.0 * (yi * std::log(p) + (1.0 - yi) * std::log(1.0 - p));
}

// Fits the path; stops early once the deviance ratio saturates (0.999) or
// stops moving (relative change < 1e-5), as glmnet does.
inline std::vector<LassoState> fit_path(const Matrix& X, const Vector& y, const std::vector<double>& lambdas,
                                        const LassoOptions& opt, bool early_stop) {
  std::vector<LassoState> path;
  LassoState s = null_state(X, y);
  const double null_dev = 2.0 * logistic_loss(X, y, s);
  double prev_ratio = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    solve_lasso_logistic(X, y, lambdas[k], s, opt, nullptr);
    path.push_back(s);
    if (!early_stop || null_dev <= 0.0) continue;
    const double ratio = 1.0 - 2.0 * logistic_loss(X, y, s) / null_dev;
    if (ratio > 0.999) break;
    if (k > 0 && ratio - prev_ratio < 1e-5 * ratio) break;
    prev_ratio = ratio;
  }
  return path;
}

}  // namespace detail

inline std::vector<double> lambda_sequence(double lmax, std::size_t count, double min_ratio) {
  std::vector<double> l(count);
  for (std::size_t k = 0; k < count; ++k)
    l[k] = count == 1 ? lmax
                      : lmax * std::pow(min_ratio, static_cast<double>(k) / static_cast<double>(count - 1));
  return l;
}

struct LogisticOptions {
  LassoOptions lasso;
  std::size_t n_lambda = 50;
  double lambda_min_ratio = 1e-3;
  std::size_t folds = 10;
  std::optional<double> fixed_lambda;  // skip the path and CV
};

// y must hold 0/1 labels.
inline LogisticFit fit_logistic(const Matrix& X, const Vector& y, const LogisticOptions& opt, RngStream& stream) {
  const Eigen::Index N = X.rows();
  const detail::Design d = detail::make_design(X, opt.lasso.standardize);
  LogisticFit fit;
  detail::LassoState chosen;

  if (opt.fixed_lambda) {
    fit.lambda = *opt.fixed_lambda;
    chosen = detail::null_state(d.X, y);
    detail::solve_lasso_logistic(d.X, y, fit.lambda, chosen, opt.lasso, &fit.objective_trace);
    fit.path_lambdas = {fit.lambda};
  } else {
    const double lmax = std::max(detail::lambda_max(d.X, y), 1e-12);
    std::vector<double> lambdas = lambda_sequence(lmax, opt.n_lambda, opt.lambda_min_ratio);
    std::vector<detail::LassoState> path = detail::fit_path(d.X, y, lambdas, opt.lasso, true);
    lambdas.resize(path.size());
    fit.path_lambdas = lambdas;

    std::size_t best = path.size() - 1;
    if (opt.folds >= 2 && path.size() > 1) {
      std::vector<Eigen::Index> perm(static_cast<std::size_t>(N));
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = perm.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(stream.uniform01() * static_cast<double>(i));
        std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
      }
      std::vector<std::size_t> fold(static_cast<std::size_t>(N));
      for (std::size_t i = 0; i < perm.size(); ++i) fold[static_cast<std::size_t>(perm[i])] = i % opt.folds;

      std::vector<double> dev(lambdas.size(), 0.0);
      for (std::size_t f = 0; f < opt.folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < N; ++i) (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        if (te.empty()) continue;
        const Matrix Xtr = d.X(tr, Eigen::all);
        const Vector ytr = y(tr);
        std::vector<detail::LassoState> fp;
        if (ytr.minCoeff() == ytr.maxCoeff()) {
          fp.assign(lambdas.size(), detail::null_state(Xtr, ytr));
        } else {
          fp = detail::fit_path(Xtr, ytr, lambdas, opt.lasso, false);
        }
        for (std::size_t k = 0; k < lambdas.size(); ++k) {
          const detail::LassoState& s = fp[std::min(k, fp.size() - 1)];
          for (Eigen::Index i : te) dev[k] += detail::binomial_deviance(y(i), s.b0 + d.X.row(i).dot(s.beta));
        }
      }
      for (auto& v : dev) v /= static_cast<double>(N);
      best = static_cast<std::size_t>(std::min_element(dev.begin(), dev.end()) - dev.begin());
      fit.cv_deviance = dev;
    }
    fit.selected = best;
    fit.lambda = lambdas[best];
    chosen = path[best];
    // Polish at the selected lambda and keep the descent trace.
    detail::solve_lasso_logistic(d.X, y, fit.lambda, chosen, opt.lasso, &fit.objective_trace);
  }
  fit.kkt_residual = detail::kkt_residual(d.X, y, chosen, fit.lambda);

  fit.coef = Vector::Zero(X.cols());
  fit.intercept = chosen.b0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (d.scale(j) == 0.0) continue;
    fit.coef(j) = chosen.beta(j) / d.scale(j);
    fit.intercept -= fit.coef(j) * d.mean(j);
  }
  return fit;
}

// Penalized objective of a fitted model on the scale it was fitted on.
inline double logistic_objective(const Matrix& X, const Vector& y, double b0, const Vector& beta, double lambda) {
  detail::LassoState s{b0, beta};
  return detail::lasso_objective(X, y, s, lambda);
}

}  // namespace mhc

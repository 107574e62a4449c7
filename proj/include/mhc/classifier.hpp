#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mhc/error.hpp"
#include "mhc/features.hpp"
#include "mhc/forest.hpp"
#include "mhc/logistic.hpp"
#include "mhc/models.hpp"
#include "mhc/neural_net.hpp"
#include "mhc/rand.hpp"
#include "mhc/types.hpp"

namespace mhc {

struct ClassifierSpec {
  // constant is D = 1/2 everywhere (the slice ablation).
  enum class Kind { logistic_l1_cv, random_forest, neural_net, oracle, constant };
  Kind kind = Kind::logistic_l1_cv;
  double eps_clip = 1e-6;
  LogisticOptions logistic;
  ForestOptions forest;
  NeuralNetOptions net;
  // Reference parameter for the oracle discriminator.
  std::vector<double> oracle_theta0;

  void validate() const {
    if (!(eps_clip > 0.0 && eps_clip < 0.5)) throw ConfigError("classifier: eps_clip must lie in (0, 0.5)");
    if (kind == Kind::logistic_l1_cv) {
      if (!logistic.fixed_lambda && (logistic.n_lambda < 1 || !(logistic.lambda_min_ratio > 0)))
        throw ConfigError("classifier: lambda path must be nonempty with positive ratio");
      if (logistic.fixed_lambda && *logistic.fixed_lambda < 0) throw ConfigError("classifier: lambda must be >= 0");
      if (!(logistic.lasso.tol > 0)) throw ConfigError("classifier: tolerance must be positive");
    }
    if (kind == Kind::random_forest && (forest.n_trees < 1 || forest.min_leaf < 1))
      throw ConfigError("classifier: forest needs at least one tree and min_leaf >= 1");
    if (kind == Kind::neural_net && (net.hidden < 1 || !(net.learning_rate > 0) || net.momentum < 0))
      throw ConfigError("classifier: invalid network hyperparameters");
  }
};

inline std::string to_string(ClassifierSpec::Kind k) {
  switch (k) {
    case ClassifierSpec::Kind::logistic_l1_cv: return "logistic_l1_cv";
    case ClassifierSpec::Kind::random_forest: return "random_forest";
    case ClassifierSpec::Kind::neural_net: return "neural_net";
    case ClassifierSpec::Kind::oracle: return "oracle";
    case ClassifierSpec::Kind::constant: return "constant";
  }
  return "?";
}

inline ClassifierSpec::Kind classifier_kind_from_string(const std::string& s) {
  for (auto k : {ClassifierSpec::Kind::logistic_l1_cv, ClassifierSpec::Kind::random_forest,
                 ClassifierSpec::Kind::neural_net, ClassifierSpec::Kind::oracle, ClassifierSpec::Kind::constant})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown classifier kind: " + s);
}

struct LogisticModel {
  double intercept = 0.0;
  Vector coef;
  double lambda = 0.0;
};

struct OracleModel {
  ModelSpec model;
  ParamPoint theta;
  ParamPoint theta0;
};

struct ConstantModel {};

struct Discriminator {
  ClassifierSpec::Kind kind = ClassifierSpec::Kind::constant;
  std::variant<ConstantModel, LogisticModel, ForestModel, NeuralNetModel, OracleModel> model;
  FeatureSpec features;
  std::optional<PcaBasis> pca;
  double eps_clip = 1e-6;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::size_t width = 0;

  double logit_bound() const { return std::log((1.0 - eps_clip) / eps_clip); }

  // Clipped log(D / (1 - D)) at one feature row.
  double logit(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (static_cast<std::size_t>(row.size()) != width)
      throw FeatureError("discriminator: row width " + std::to_string(row.size()) + " != " + std::to_string(width));
    const double L = logit_bound();
    double v = 0.0;
    switch (kind) {
      case ClassifierSpec::Kind::constant: v = 0.0; break;
      case ClassifierSpec::Kind::logistic_l1_cv: {
        const auto& m = std::get<LogisticModel>(model);
        v = m.intercept + row.dot(m.coef.transpose());
        break;
      }
      case ClassifierSpec::Kind::random_forest: {
        const double q = std::get<ForestModel>(model).predict(row);
        const double qc = std::clamp(q, eps_clip, 1.0 - eps_clip);
        v = std::log(qc) - std::log1p(-qc);
        break;
      }
      case ClassifierSpec::Kind::neural_net: v = std::get<NeuralNetModel>(model).output(row); break;
      case ClassifierSpec::Kind::oracle: {
        const auto& o = std::get<OracleModel>(model);
        v = oracle_row_log_density(o.model, o.theta0, row) - oracle_row_log_density(o.model, o.theta, row);
        break;
      }
    }
    if (std::isnan(v)) throw ContractViolation("discriminator produced NaN");
    return std::clamp(v, -L, L);
  }

  double predict_proba(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    const double l = logit(row);
    const double L = logit_bound();
    if (l <= -L) return eps_clip;
    if (l >= L) return 1.0 - eps_clip;
    const double p = l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
    return std::clamp(p, eps_clip, 1.0 - eps_clip);
  }
};

inline double predict_proba(const Discriminator& d, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  return d.predict_proba(row);
}

inline Discriminator constant_discriminator(std::size_t width, double eps_clip = 1e-6) {
  Discriminator d;
  d.kind = ClassifierSpec::Kind::constant;
  d.width = width;
  d.eps_clip = eps_clip;
  return d;
}

// Bayes classifier p0 / (p0 + p_theta) on raw rows.
inline Discriminator oracle_discriminator(const ModelSpec& spec, const ParamPoint& theta, const ParamPoint& theta0,
                                          double eps_clip = 1e-6) {
  if (!spec.has_oracle_density()) throw UnavailableError(to_string(spec.id) + ": no oracle discriminator");
  Discriminator d;
  d.kind = ClassifierSpec::Kind::oracle;
  d.model = OracleModel{spec, theta, theta0};
  d.features.kind = FeatureSpec::Kind::raw;
  d.eps_clip = eps_clip;
  d.width = spec.row_width();
  return d;
}

inline Discriminator fit(const ClassifierSpec& spec, const Matrix& real, const Matrix& fake, RngStream& stream) {
  spec.validate();
  if (real.cols() != fake.cols()) throw FeatureError("fit: real and fake feature widths differ");
  if (real.rows() < 2 || fake.rows() < 2) throw ContractViolation("fit: need at least two rows of each class");
  Discriminator d;
  d.kind = spec.kind;
  d.eps_clip = spec.eps_clip;
  d.n_real = static_cast<std::size_t>(real.rows());
  d.n_fake = static_cast<std::size_t>(fake.rows());
  d.width = static_cast<std::size_t>(real.cols());
  if (spec.kind == ClassifierSpec::Kind::constant) return d;
  if (spec.kind == ClassifierSpec::Kind::oracle)
    throw ContractViolation("fit: the oracle discriminator is built with oracle_discriminator");

  Matrix X(real.rows() + fake.rows(), real.cols());
  X << real, fake;
  Vector y(X.rows());
  y.head(real.rows()).setOnes();
  y.tail(fake.rows()).setZero();
  if (!X.allFinite()) throw FeatureError("fit: non-finite features");

  switch (spec.kind) {
    case ClassifierSpec::Kind::logistic_l1_cv: {
      const LogisticFit f = fit_logistic(X, y, spec.logistic, stream);
      d.model = LogisticModel{f.intercept, f.coef, f.lambda};
      break;
    }
    case ClassifierSpec::Kind::random_forest: d.model = fit_forest(X, y, spec.forest, stream); break;
    case ClassifierSpec::Kind::neural_net: d.model = fit_neural_net(X, y, spec.net, stream); break;
    default: break;
  }
  return d;
}

// Pooled mean log-likelihood of the labels: the cross-entropy objective
// with real rows labelled 1. The constant n/(n+m) maximizes it over constants.
inline double training_objective(const Discriminator& d, const Matrix& real, const Matrix& fake) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < real.rows(); ++i) s += std::log(d.predict_proba(real.row(i)));
  for (Eigen::Index i = 0; i < fake.rows(); ++i) s += std::log1p(-d.predict_proba(fake.row(i)));
  return s / static_cast<double>(real.rows() + fake.rows());
}

inline double constant_objective(std::size_t n, std::size_t m) {
  const double q = static_cast<double>(n) / static_cast<double>(n + m);
  return (static_cast<double>(n) * std::log(q) + static_cast<double>(m) * std::log1p(-q)) /
         static_cast<double>(n + m);
}

// Logistic coefficients (on 1, x, x^2) of the normal_ls oracle against (0, 1).
inline std::array<double, 3> normal_oracle_beta(double mu, double sigma2) {
  return {0.5 * std::log(sigma2) + mu * mu / (2.0 * sigma2), -mu / sigma2, 1.0 / (2.0 * sigma2) - 0.5};
}

}  // namespace mhc

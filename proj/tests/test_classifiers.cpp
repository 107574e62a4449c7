#include <gtest/gtest.h>

#include <cmath>

#include "mhc/classifier.hpp"
#include "mhc/features.hpp"
#include "mhc/models.hpp"

using namespace mhc;

namespace {

Matrix normal_column(RngStream& s, Eigen::Index n, double mu = 0.0, double sd = 1.0) {
  Matrix X(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) X(i, 0) = mu + sd * std_normal(s);
  return X;
}

Matrix poly2(const Matrix& x) {
  FeatureSpec fs;
  fs.kind = FeatureSpec::Kind::poly2;
  return build_features(x, fs);
}

ClassifierSpec small_spec(ClassifierSpec::Kind k) {
  ClassifierSpec c;
  c.kind = k;
  c.forest.n_trees = 100;
  c.net.hidden = 10;
  c.net.epochs = 200;
  return c;
}

// Proximal-gradient (ISTA) solver for the L1 logistic objective on the raw
// design, run to a tight fixed point. Independent of the coordinate solver.
std::pair<double, Vector> ista_oracle(const Matrix& X, const Vector& y, double lambda) {
  const Eigen::Index N = X.rows(), p = X.cols();
  double L = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) L += 1.0 + X.row(i).squaredNorm();
  L *= 0.25 / static_cast<double>(N);
  const double step = 1.0 / L;
  double b0 = 0.0;
  Vector b = Vector::Zero(p);
  for (int it = 0; it < 400000; ++it) {
    Vector r(N);
    for (Eigen::Index i = 0; i < N; ++i) r(i) = 1.0 / (1.0 + std::exp(-(b0 + X.row(i).dot(b)))) - y(i);
    const double g0 = r.mean();
    const Vector g = X.transpose() * r / static_cast<double>(N);
    b0 -= step * g0;
    Vector z = b - step * g;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double t = step * lambda;
      z(j) = z(j) > t ? z(j) - t : (z(j) < -t ? z(j) + t : 0.0);
    }
    b = z;
  }
  return {b0, b};
}

}  // namespace

TEST(Logistic, IdenticalClassesGiveBalancedPredictions) {
  RngStream s(1, 0);
  const Matrix x = poly2(normal_column(s, 500));
  const Discriminator d = fit(ClassifierSpec{}, x, x, s);
  double dev = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) dev += std::fabs(d.predict_proba(x.row(i)) - 0.5);
  EXPECT_LT(dev / x.rows(), 0.05);
}

TEST(Forest, IdenticalClassesGiveBalancedPredictions) {
  RngStream s(2, 0);
  const Matrix x = poly2(normal_column(s, 500));
  ClassifierSpec c;
  c.kind = ClassifierSpec::Kind::random_forest;
  const Discriminator d = fit(c, x, x, s);
  double dev = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) dev += std::fabs(d.predict_proba(x.row(i)) - 0.5);
  EXPECT_LT(dev / x.rows(), 0.05);
}

TEST(Logistic, SeparableClusters) {
  RngStream s(3, 0);
  const Matrix a = normal_column(s, 200, 10.0), b = normal_column(s, 200, -10.0);
  const Discriminator d = fit(ClassifierSpec{}, a, b, s);
  int correct = 0;
  for (Eigen::Index i = 0; i < 200; ++i) {
    correct += d.predict_proba(a.row(i)) > 0.5;
    correct += d.predict_proba(b.row(i)) < 0.5;
  }
  EXPECT_GE(correct / 400.0, 0.99);
}

// Real N(0,1) against fake N(1,1): the Bayes logit is 1/2 - x.
TEST(Logistic, RecoversOracleCoefficientOnX) {
  RngStream s(4, 0);
  const Matrix real = poly2(normal_column(s, 5000)), fake = poly2(normal_column(s, 5000, 1.0));
  const Discriminator d = fit(ClassifierSpec{}, real, fake, s);
  const auto& m = std::get<LogisticModel>(d.model);
  const auto beta = normal_oracle_beta(1.0, 1.0);
  EXPECT_EQ(beta[1], -1.0);
  EXPECT_NEAR(m.coef(0), beta[1], 0.15);
  EXPECT_NEAR(m.intercept, beta[0], 0.15);
  EXPECT_NEAR(m.coef(1), beta[2], 0.1);
}

TEST(Logistic, ClipAtExtremeWeights) {
  Discriminator d = constant_discriminator(1);
  d.kind = ClassifierSpec::Kind::logistic_l1_cv;
  d.model = LogisticModel{std::log((1 - 1e-12) / 1e-12), Vector::Zero(1), 0.0};
  Eigen::RowVectorXd row(1);
  row << 0.3;
  EXPECT_EQ(d.predict_proba(row), 1.0 - 1e-6);
  EXPECT_NEAR(d.logit(row), std::log((1 - 1e-6) / 1e-6), 1e-12);
  d.model = LogisticModel{-40.0, Vector::Zero(1), 0.0};
  EXPECT_EQ(d.predict_proba(row), 1e-6);
}

TEST(Forest, OutputIsVoteFraction) {
  RngStream s(5, 0);
  const Matrix a = normal_column(s, 100), b = normal_column(s, 100, 0.5);
  const Discriminator d = fit(small_spec(ClassifierSpec::Kind::random_forest), a, b, s);
  const auto& f = std::get<ForestModel>(d.model);
  for (Eigen::Index i = 0; i < 100; ++i) {
    const double q = f.predict(a.row(i));
    EXPECT_GE(q, 0.0);
    EXPECT_LE(q, 1.0);
    EXPECT_NEAR(q * 100, std::round(q * 100), 1e-9);
    const double p = d.predict_proba(a.row(i));
    EXPECT_GE(p, 1e-6);
    EXPECT_LE(p, 1 - 1e-6);
  }
}

TEST(Oracle, BalancedAtTruth) {
  const ModelSpec spec = ModelSpec::make(ModelId::normal_ls);
  const Discriminator d = oracle_discriminator(spec, spec.point({0, 1}), spec.point({0, 1}));
  RngStream s(6, 0);
  for (int i = 0; i < 100; ++i) {
    Eigen::RowVectorXd row(1);
    row << 3 * std_normal(s);
    EXPECT_EQ(d.predict_proba(row), 0.5);
  }
}

TEST(Oracle, NormalMatchesLogisticForm) {
  const ModelSpec spec = ModelSpec::make(ModelId::normal_ls);
  const double mu = 0.4, s2 = 1.7;
  const Discriminator d = oracle_discriminator(spec, spec.point({mu, s2}), spec.point({0, 1}));
  const auto b = normal_oracle_beta(mu, s2);
  for (double x : {-2.0, -0.5, 0.0, 1.0, 2.5}) {
    Eigen::RowVectorXd row(1);
    row << x;
    EXPECT_NEAR(d.predict_proba(row), 1.0 / (1.0 + std::exp(-b[0] - b[1] * x - b[2] * x * x)), 1e-14);
  }
}

TEST(Oracle, GaussChoiceLogOddsIdentity) {
  const ModelSpec spec = ModelSpec::make(ModelId::gauss_choice);
  const ParamPoint th = spec.point({2, 0.3}), th0 = spec.point({1, 0});
  const Discriminator d = oracle_discriminator(spec, th, th0);
  RngStream s(7, 0);
  for (int i = 0; i < 100; ++i) {
    Dataset one = empty_dataset(spec, 1);
    one.rows(0, 0) = 2 * std_normal(s);
    const double D = d.predict_proba(one.rows.row(0));
    const double lhs = std::log((1 - D) / D);
    const double rhs = *oracle_log_lik(spec, th, one) - *oracle_log_lik(spec, th0, one);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Oracle, UnavailableModels) {
  const ModelSpec spec = ModelSpec::make(ModelId::ricker);
  EXPECT_THROW(oracle_discriminator(spec, spec.point({3.8, 1, 10}), spec.point({3.8, 1, 10})), UnavailableError);
}

TEST(Fit, BeatsConstantClassifier) {
  RngStream s(8, 0);
  const Matrix a = poly2(normal_column(s, 300)), b = poly2(normal_column(s, 200, 0.3, 1.4));
  for (auto k : {ClassifierSpec::Kind::logistic_l1_cv, ClassifierSpec::Kind::random_forest,
                 ClassifierSpec::Kind::neural_net}) {
    const Discriminator d = fit(small_spec(k), a, b, s);
    EXPECT_GE(training_objective(d, a, b), constant_objective(300, 200) - 1e-9) << to_string(k);
  }
}

TEST(Logistic, DescentAndKkt) {
  RngStream s(9, 0);
  Matrix real(400, 6), fake(400, 6);
  for (Eigen::Index i = 0; i < 400; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) {
      real(i, j) = std_normal(s) + (j < 2 ? 0.3 : 0.0);
      fake(i, j) = std_normal(s);
    }
  Matrix X(800, 6);
  X << real, fake;
  Vector y(800);
  y.head(400).setOnes();
  y.tail(400).setZero();
  const LogisticFit f = fit_logistic(X, y, LogisticOptions{}, s);
  ASSERT_GE(f.objective_trace.size(), 1u);
  for (std::size_t t = 1; t < f.objective_trace.size(); ++t)
    EXPECT_LE(f.objective_trace[t], f.objective_trace[t - 1] + 1e-15);
  EXPECT_LT(f.kkt_residual, 1e-6);
  EXPECT_EQ(f.cv_deviance.size(), f.path_lambdas.size());
  EXPECT_EQ(f.lambda, f.path_lambdas[f.selected]);
}

TEST(Logistic, TinyProblemMatchesProximalOracle) {
  RngStream s(10, 0);
  Matrix X(20, 2);
  Vector y(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    y(i) = i < 10 ? 1.0 : 0.0;
    X(i, 0) = std_normal(s) + (i < 10 ? 0.8 : 0.0);
    X(i, 1) = std_normal(s);
  }
  for (double lambda : {0.02, 0.1}) {
    LogisticOptions opt;
    opt.fixed_lambda = lambda;
    opt.lasso.standardize = false;
    opt.lasso.tol = 1e-12;
    const LogisticFit f = fit_logistic(X, y, opt, s);
    const auto [b0, b] = ista_oracle(X, y, lambda);
    EXPECT_NEAR(f.intercept, b0, 1e-4) << lambda;
    EXPECT_NEAR(f.coef(0), b(0), 1e-4) << lambda;
    EXPECT_NEAR(f.coef(1), b(1), 1e-4) << lambda;
  }
}

TEST(Logistic, LambdaMaxZeroesEverything) {
  RngStream s(11, 0);
  Matrix X(50, 3);
  Vector y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    y(i) = i % 2;
    for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = std_normal(s) + y(i);
  }
  const detail::Design d = detail::make_design(X, true);
  LogisticOptions opt;
  opt.fixed_lambda = detail::lambda_max(d.X, y) * (1 + 1e-9);
  const LogisticFit f = fit_logistic(X, y, opt, s);
  EXPECT_EQ(f.coef.lpNorm<1>(), 0.0);
}

TEST(NeuralNet, FinalLossNotAboveInitial) {
  RngStream s(12, 0);
  const Matrix a = poly2(normal_column(s, 200)), b = poly2(normal_column(s, 200, 0.5));
  Matrix X(400, 2);
  X << a, b;
  Vector y(400);
  y.head(200).setOnes();
  y.tail(200).setZero();
  for (double lr : {0.01, 0.5, 5.0}) {
    NeuralNetOptions opt;
    opt.learning_rate = lr;
    opt.epochs = 100;
    const NeuralNetModel m = fit_neural_net(X, y, opt, s);
    EXPECT_LE(m.final_loss, m.initial_loss) << lr;
    Vector o(400);
    for (Eigen::Index i = 0; i < 400; ++i) o(i) = m.output(X.row(i));
    EXPECT_NEAR(detail::nn_loss(o, y), m.final_loss, 1e-12);
  }
}

TEST(Fit, DeterministicGivenStream) {
  RngStream s(13, 0);
  const Matrix a = poly2(normal_column(s, 150)), b = poly2(normal_column(s, 150, 0.4));
  for (auto k : {ClassifierSpec::Kind::logistic_l1_cv, ClassifierSpec::Kind::random_forest,
                 ClassifierSpec::Kind::neural_net}) {
    RngStream s1(99, 1), s2(99, 1);
    const Discriminator d1 = fit(small_spec(k), a, b, s1), d2 = fit(small_spec(k), a, b, s2);
    for (Eigen::Index i = 0; i < a.rows(); ++i) ASSERT_EQ(d1.logit(a.row(i)), d2.logit(a.row(i))) << to_string(k);
    EXPECT_EQ(s1, s2);
  }
}

TEST(Fit, Errors) {
  RngStream s(14, 0);
  EXPECT_THROW(fit(ClassifierSpec{}, Matrix::Ones(5, 2), Matrix::Ones(5, 3), s), FeatureError);
  EXPECT_THROW(fit(ClassifierSpec{}, Matrix::Ones(1, 2), Matrix::Ones(5, 2), s), ContractViolation);
  EXPECT_THROW(fit(ClassifierSpec{}, Matrix::Ones(5, 2), Matrix(0, 2), s), ContractViolation);
  const Discriminator d = constant_discriminator(2);
  EXPECT_THROW(d.predict_proba(Eigen::RowVectorXd::Zero(3)), FeatureError);
  ClassifierSpec bad;
  bad.eps_clip = 0.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ClassifierSpec{};
  bad.kind = ClassifierSpec::Kind::random_forest;
  bad.forest.n_trees = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Fit, ConstantIsOneHalf) {
  const Discriminator d = constant_discriminator(4);
  EXPECT_EQ(d.predict_proba(Eigen::RowVectorXd::Ones(4)), 0.5);
  EXPECT_EQ(d.logit(Eigen::RowVectorXd::Ones(4)), 0.0);
}

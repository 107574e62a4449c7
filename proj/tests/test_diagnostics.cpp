#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mhc/diagnostics.hpp"
#include "mhc/theory.hpp"

using namespace mhc;

namespace {

Chain chain_of(const std::vector<double>& x) {
  Chain c;
  c.names = {"x"};
  c.discrete = {false};
  for (double v : x) c.push({v}, 0, 0, true);
  return c;
}

std::vector<double> ar1(double rho, std::size_t T, std::uint64_t seed) {
  RngStream s(seed, 0);
  std::vector<double> x(T);
  double v = std_normal(s) / std::sqrt(1 - rho * rho);
  for (auto& e : x) e = v = rho * v + std_normal(s);
  return x;
}

}  // namespace

TEST(Autocovariance, MatchesDirectSum) {
  const auto x = ar1(0.5, 300, 1);
  const auto g = autocovariance(x);
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / 300.0;
  for (std::size_t k : {0u, 1u, 5u, 299u}) {
    double s = 0.0;
    for (std::size_t t = 0; t + k < 300; ++t) s += (x[t] - m) * (x[t + k] - m);
    EXPECT_NEAR(g[k], s / 300.0, 1e-10) << k;
  }
}

TEST(Ess, IidIsNearT) {
  RngStream s(2, 0);
  const auto x = sample(s, DistSpec::normal(0, 1), 10000);
  const EssResult e = ess(x);
  EXPECT_FALSE(e.degenerate);
  EXPECT_GE(e.value, 8000.0);
  EXPECT_LE(e.value, 10500.0);
}

TEST(Ess, Ar1MatchesIntegratedTime) {
  const auto x = ar1(0.9, 100000, 3);
  const double ratio = ess(x).value / 100000.0;
  EXPECT_NEAR(ratio / (0.1 / 1.9), 1.0, 0.25);
}

TEST(Ess, ConstantIsDegenerate) {
  const EssResult e = ess(std::vector<double>(100, 2.5));
  EXPECT_TRUE(e.degenerate);
  EXPECT_EQ(e.value, 0.0);
}

TEST(Ess, NeverExceedsT) {
  // Alternating chains have negative lag-1 correlation.
  std::vector<double> x;
  RngStream s(4, 0);
  for (int t = 0; t < 1000; ++t) x.push_back((t % 2 ? 1.0 : -1.0) + 0.1 * std_normal(s));
  EXPECT_LE(ess(x).value, 1000.0);
  EXPECT_GT(ess(x).value, 0.0);
}

TEST(Summarize, UniformQuantiles) {
  RngStream s(5, 0);
  const Chain c = chain_of(sample(s, DistSpec::uniform(0, 1), 100000));
  const PosteriorSummary p = summarize(c, 0);
  EXPECT_NEAR(p.coords[0].l, 0.025, 0.005);
  EXPECT_NEAR(p.coords[0].u, 0.975, 0.005);
  EXPECT_NEAR(p.coords[0].mean, 0.5, 0.005);
  EXPECT_EQ(p.accept_rate, 1.0);
}

TEST(Summarize, ConstantChain) {
  const PosteriorSummary p = summarize(chain_of(std::vector<double>(50, 4.0)), 10);
  EXPECT_EQ(p.coords[0].mean, 4.0);
  EXPECT_EQ(p.coords[0].l, 4.0);
  EXPECT_EQ(p.coords[0].u, 4.0);
  EXPECT_TRUE(p.coords[0].ess_degenerate);
  EXPECT_EQ(p.draws, 40u);
}

TEST(Summarize, BurnInMustLeaveDraws) {
  EXPECT_THROW(summarize(chain_of({1, 2, 3}), 3), ContractViolation);
}

TEST(Summarize, QuantilesIgnoreOrder) {
  RngStream s(6, 0);
  auto x = sample(s, DistSpec::normal(0, 1), 999);
  const auto a = summarize(chain_of(x), 0);
  std::reverse(x.begin(), x.end());
  const auto b = summarize(chain_of(x), 0);
  EXPECT_EQ(a.coords[0].l, b.coords[0].l);
  EXPECT_EQ(a.coords[0].u, b.coords[0].u);
}

TEST(Quantile, Type7) {
  const std::vector<double> x{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(x, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(x, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(x, 0.25), 1.75);
}

TEST(BayesFactor, FrequencyRatios) {
  const auto draws = [](int a, int b) {
    std::vector<double> v(static_cast<std::size_t>(a), 1.0);
    v.insert(v.end(), static_cast<std::size_t>(b), 2.0);
    return v;
  };
  EXPECT_NEAR(bayes_factor(draws(466, 34)).value, 13.71, 0.005);
  EXPECT_EQ(bayes_factor(draws(250, 250)).value, 1.0);
  EXPECT_NEAR(bayes_factor(draws(422, 78)).value, 5.41, 0.005);
  const auto inf = bayes_factor(draws(10, 0));
  EXPECT_EQ(inf.status, BayesFactor::Status::infinite);
  EXPECT_EQ(inf.value, kPosInf);
  EXPECT_EQ(bayes_factor(draws(0, 10)).status, BayesFactor::Status::zero);
  EXPECT_EQ(bayes_factor(draws(466, 34)).count1, 466u);
}

TEST(Ks, UniformSampleAccepted) {
  RngStream s(7, 0);
  const auto x = sample(s, DistSpec::uniform(0, 1), 2000);
  const KsResult k = ks_test(x, [](double v) { return std::clamp(v, 0.0, 1.0); });
  EXPECT_GT(k.p_value, 0.01);
  EXPECT_LT(k.statistic, 0.05);
}

TEST(Ks, ShiftedSampleRejected) {
  RngStream s(8, 0);
  auto x = sample(s, DistSpec::uniform(0, 1), 2000);
  for (auto& v : x) v = v * 0.8;
  EXPECT_LT(ks_test(x, [](double v) { return std::clamp(v, 0.0, 1.0); }).p_value, 1e-6);
}

TEST(Ks, SingleObservation) {
  // One point at 0.5: D = 0.5.
  EXPECT_DOUBLE_EQ(ks_test({0.5}, [](double v) { return v; }).statistic, 0.5);
}

// Tilting N(mu, var) by exp(u x) gives N(mu + var u, var); check by
// integrating x exp(u x) phi against exp(u x) phi on a fine grid.
TEST(Tilt, ShiftsTheMean) {
  const double mu = 0.3, var = 2.0, u = 0.7;
  double num = 0.0, den = 0.0;
  for (double x = -30; x <= 30; x += 1e-3) {
    const double w = std::exp(u * x + log_normal_pdf(x, mu, std::sqrt(var)));
    num += x * w;
    den += w;
  }
  EXPECT_NEAR(exponential_tilt_mean(mu, var, u), num / den, 1e-9);
  EXPECT_DOUBLE_EQ(exponential_tilt_mean(mu, var, u), mu + var * u);
}

TEST(Theory, MgfMatchesQuadrature) {
  for (auto [a0, a1, a2] : {std::array<double, 3>{0.1, -0.3, 0.2}, {-0.5, 0.8, -0.4}}) {
    double s = 0.0;
    for (double x = -40; x <= 40; x += 1e-3) s += std::exp(a0 + a1 * x + a2 * x * x + log_normal_pdf(x, 0, 1)) * 1e-3;
    EXPECT_NEAR(detail::gaussian_quadratic_mgf(a0, a1, a2), s, 1e-8);
  }
  EXPECT_EQ(detail::gaussian_quadratic_mgf(0, 0, 0.5), kPosInf);
}

// At the Bayes logistic coefficients the estimated density integrates to 1.
TEST(Theory, ScalingConstantIsOneAtTrueCoefficients) {
  for (auto [mu, s2] : {std::pair{0.3, 1.5}, {-1.0, 0.6}, {0.0, 1.0}}) {
    const std::array<double, 3> b{0.5 * std::log(s2) + mu * mu / (2 * s2), -mu / s2, 1 / (2 * s2) - 0.5};
    EXPECT_NEAR(detail::normal_scaling_constant(b), 1.0, 1e-12);
  }
}

TEST(Theory, OracleBaselineEqualsTruth) {
  TheoryOptions o;
  o.n = o.m = 500;
  o.grid = mu_grid(0.1, 11);
  o.use_oracle = true;
  RngStream s(9, 0);
  const TheoryReport r = theory_check_normal(o, s);
  for (std::size_t k = 0; k < r.grid.size(); ++k)
    EXPECT_NEAR(r.estimated[k], r.truth[k], 1e-9 * std::max(1.0, std::fabs(r.truth[k])));
}

TEST(Theory, EstimatedCurveHasOracleCurvature) {
  TheoryOptions o;
  o.grid = mu_grid(0.1, 21);
  RngStream s(10, 0);
  const TheoryReport r = theory_check_normal(o, s);
  EXPECT_TRUE(r.pass) << r.max_deviation << " vs " << r.band * r.range;
  for (std::size_t k = 0; k < r.grid.size(); ++k) {
    EXPECT_TRUE(std::isfinite(r.scaling[k]));
    EXPECT_TRUE(std::isfinite(r.projection[k]));
    EXPECT_TRUE(std::isfinite(r.remainder[k]));
  }
}

TEST(Theory, Sigma2GridRuns) {
  TheoryOptions o;
  o.n = o.m = 2000;
  o.grid = sigma2_grid(0.1, 11);
  RngStream s(11, 0);
  const TheoryReport r = theory_check_normal(o, s);
  EXPECT_EQ(r.estimated.size(), 11u);
  EXPECT_GT(r.range, 0.0);
}

TEST(Theory, AsymmetricGridIsRejected) {
  TheoryOptions o;
  o.grid = {{-0.1, 0}, {0, 0}, {0.2, 0}};
  RngStream s(12, 0);
  EXPECT_THROW(theory_check_normal(o, s), ConfigError);
}

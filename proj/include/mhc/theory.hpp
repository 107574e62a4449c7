#pragma once

#include <Eigen/QR>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mhc/classifier.hpp"
#include "mhc/error.hpp"
#include "mhc/features.hpp"
#include "mhc/likelihood.hpp"
#include "mhc/models.hpp"
#include "mhc/rand.hpp"

namespace mhc {

// Local behaviour of the estimated log-likelihood ratio in the normal
// location-scale model around theta0 = (0, 1). Offsets are (dmu, dsigma2).
struct TheoryReport {
  std::size_t n = 0, m = 0;
  std::vector<std::array<double, 2>> grid;
  std::vector<double> estimated;  // eta-hat(theta0 + h)
  std::vector<double> truth;      // exact log p_theta(X) - log p_theta0(X)
  std::vector<double> quadratic;  // a + b'h - n h'Ih / 2, fitted to estimated
  double intercept = 0.0;
  std::array<double, 2> slope{0.0, 0.0};
  double max_deviation = 0.0;
  double range = 0.0;
  bool pass = false;
  double band = 0.15;
  // Scaling constant and empirical-process terms at each grid point.
  std::vector<double> scaling;     // n (c_theta - c_theta0)
  std::vector<double> projection;  // n (P_n - P_theta0)(sqrt(phat/phat0) - 1 - h'score/2)
  std::vector<double> remainder;   // n (P_n - P_theta0)(sqrt(phat/phat0) - 1)^2
  bool oracle = false;
};

struct TheoryOptions {
  std::size_t n = 5000;
  std::size_t m = 5000;
  std::vector<std::array<double, 2>> grid;
  bool use_oracle = false;
  double band = 0.15;
  ClassifierSpec cspec = [] {
    ClassifierSpec c;
    c.logistic.fixed_lambda = 0.0;
    return c;
  }();
};

// Offsets (mu, 0) for mu evenly spaced on [-half, half].
inline std::vector<std::array<double, 2>> mu_grid(double half, std::size_t steps) {
  if (steps < 2) throw ConfigError("grid: need at least two points");
  std::vector<std::array<double, 2>> g;
  for (std::size_t k = 0; k < steps; ++k)
    g.push_back({-half + 2.0 * half * static_cast<double>(k) / static_cast<double>(steps - 1), 0.0});
  return g;
}

inline std::vector<std::array<double, 2>> sigma2_grid(double half, std::size_t steps) {
  auto g = mu_grid(half, steps);
  for (auto& h : g) std::swap(h[0], h[1]);
  return g;
}

namespace detail {

// E exp(a0 + a1 X + a2 X^2) for X ~ N(0, 1); needs a2 < 1/2.
inline double gaussian_quadratic_mgf(double a0, double a1, double a2) {
  if (!(a2 < 0.5)) return kPosInf;
  const double s = 1.0 - 2.0 * a2;
  return std::exp(a0 + a1 * a1 / (2.0 * s)) / std::sqrt(s);
}

// Integral of phi(x) exp(-(b0 + b1 x + b2 x^2)).
inline double normal_scaling_constant(const std::array<double, 3>& b) {
  return gaussian_quadratic_mgf(-b[0], -b[1], -b[2]);
}

inline std::array<double, 3> logistic_coefficients(const Discriminator& d) {
  if (d.kind != ClassifierSpec::Kind::logistic_l1_cv) throw ContractViolation("theory: needs a logistic fit");
  const auto& lm = std::get<LogisticModel>(d.model);
  return {lm.intercept, lm.coef(0), lm.coef(1)};
}

}  // namespace detail

inline TheoryReport theory_check_normal(const TheoryOptions& opt, RngStream& stream) {
  if (opt.grid.size() < 3) throw ConfigError("theory_check_normal: need at least three grid points");
  for (std::size_t k = 0; k < opt.grid.size(); ++k) {
    const auto& a = opt.grid[k];
    const auto& b = opt.grid[opt.grid.size() - 1 - k];
    if (std::fabs(a[0] + b[0]) > 1e-12 || std::fabs(a[1] + b[1]) > 1e-12)
      throw ConfigError("theory_check_normal: grid must be symmetric about 0");
    if (!(1.0 + a[1] > 0.0)) throw ConfigError("theory_check_normal: sigma2 offset leaves the support");
  }
  const ModelSpec model = ModelSpec::make(ModelId::normal_ls);
  const ParamPoint theta0 = model.point({0.0, 1.0});
  std::vector<RngStream> st = split(stream, 3);
  const Dataset real = simulate(model, theta0, draw_latent(model, opt.n, st[0]), opt.n);
  const LatentSource latent = draw_latent(model, opt.m, st[1]);
  const RngStream fit_stream = st[2];
  const double n = static_cast<double>(opt.n);
  FeatureSpec fs;
  fs.kind = FeatureSpec::Kind::poly2;

  TheoryReport r;
  r.n = opt.n;
  r.m = opt.m;
  r.grid = opt.grid;
  r.oracle = opt.use_oracle;
  r.band = opt.band;

  ClassifierSpec cs = opt.cspec;
  if (opt.use_oracle) {
    cs.kind = ClassifierSpec::Kind::oracle;
    cs.oracle_theta0 = theta0.values;
  }
  const auto fit_at = [&](const ParamPoint& th) {
    const Dataset fake = simulate(model, th, latent, opt.m);
    RngStream s = fit_stream;
    return fit_replicate(real.rows, fake.rows, cs, fs, s);
  };
  const double ll0 = *oracle_log_lik(model, theta0, real);

  std::array<double, 3> b0{};
  if (!opt.use_oracle) b0 = detail::logistic_coefficients(fit_at(theta0).d);
  const double c0 = opt.use_oracle ? 1.0 : detail::normal_scaling_constant(b0);

  for (const auto& h : opt.grid) {
    const ParamPoint th = model.point({h[0], 1.0 + h[1]});
    r.truth.push_back(*oracle_log_lik(model, th, real) - ll0);
    if (opt.use_oracle) {
      r.estimated.push_back(estimate(model, th, real, std::span(&latent, 1), cs, fs, fit_stream).eta);
      r.scaling.push_back(0.0);
      r.projection.push_back(0.0);
      r.remainder.push_back(0.0);
      continue;
    }
    const Replicate rep = fit_at(th);
    r.estimated.push_back(log_lik_ratio(rep.d, rep.real_features));
    const auto b = detail::logistic_coefficients(rep.d);
    r.scaling.push_back(n * (detail::normal_scaling_constant(b) - c0));
    // sqrt(phat / phat0) = exp(a0 + a1 x + a2 x^2).
    const double a0 = -0.5 * (b[0] - b0[0]), a1 = -0.5 * (b[1] - b0[1]), a2 = -0.5 * (b[2] - b0[2]);
    double pn_proj = 0.0, pn_rem = 0.0;
    for (Eigen::Index i = 0; i < real.n(); ++i) {
      const double x = real.rows(i, 0);
      const double sq = std::exp(a0 + a1 * x + a2 * x * x);
      pn_proj += sq - 1.0 - 0.5 * (h[0] * x + h[1] * 0.5 * (x * x - 1.0));
      pn_rem += (sq - 1.0) * (sq - 1.0);
    }
    pn_proj /= n;
    pn_rem /= n;
    const double e1 = detail::gaussian_quadratic_mgf(a0, a1, a2);
    const double e2 = detail::gaussian_quadratic_mgf(2 * a0, 2 * a1, 2 * a2);
    r.projection.push_back(n * (pn_proj - (e1 - 1.0)));
    r.remainder.push_back(n * (pn_rem - (e2 - 2.0 * e1 + 1.0)));
  }

  // Fixed curvature n h'Ih / 2 with I = diag(1, 1/2); free intercept and slope.
  const Eigen::Index G = static_cast<Eigen::Index>(opt.grid.size());
  Matrix A(G, 3);
  Vector y(G);
  for (Eigen::Index k = 0; k < G; ++k) {
    const auto& h = opt.grid[static_cast<std::size_t>(k)];
    A(k, 0) = 1.0;
    A(k, 1) = h[0];
    A(k, 2) = h[1];
    y(k) = r.estimated[static_cast<std::size_t>(k)] + 0.5 * n * (h[0] * h[0] + 0.5 * h[1] * h[1]);
  }
  const Vector coef = A.completeOrthogonalDecomposition().solve(y);
  r.intercept = coef(0);
  r.slope = {coef(1), coef(2)};
  double lo = kPosInf, hi = kNegInf;
  for (Eigen::Index k = 0; k < G; ++k) {
    const auto& h = opt.grid[static_cast<std::size_t>(k)];
    const double q = coef(0) + coef(1) * h[0] + coef(2) * h[1] - 0.5 * n * (h[0] * h[0] + 0.5 * h[1] * h[1]);
    r.quadratic.push_back(q);
    const double e = r.estimated[static_cast<std::size_t>(k)];
    r.max_deviation = std::max(r.max_deviation, std::fabs(e - q));
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  r.range = hi - lo;
  for (double v : r.estimated)
    if (!std::isfinite(v)) throw ContractViolation("theory_check_normal: non-finite estimate");
  r.pass = r.max_deviation < opt.band * r.range;
  return r;
}

}  // namespace mhc

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mhc/chain.hpp"
#include "mhc/error.hpp"
#include "mhc/features.hpp"
#include "mhc/types.hpp"

namespace mhc {

struct EssResult {
  double value = 0.0;
  bool degenerate = false;
};

// Biased autocovariances gamma_0..gamma_{T-1} via FFT.
inline std::vector<double> autocovariance(std::span<const double> x) {
  const std::size_t T = x.size();
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(T);
  std::size_t L = 1;
  while (L < 2 * T) L <<= 1;
  std::vector<double> buf(L, 0.0);
  for (std::size_t t = 0; t < T; ++t) buf[t] = x[t] - m;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, buf);
  for (auto& c : spec) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> ac;
  fft.inv(ac, spec);
  ac.resize(T);
  for (auto& v : ac) v /= static_cast<double>(T);
  return ac;
}

// Geyer's initial monotone sequence estimator, capped at T.
inline EssResult ess(std::span<const double> x) {
  const std::size_t T = x.size();
  if (T < 2) return {static_cast<double>(T), T == 0};
  const std::vector<double> g = autocovariance(x);
  if (!(g[0] > 1e-300)) return {0.0, true};
  double sum = 0.0, prev = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; 2 * j + 1 < T; ++j) {
    double pair = g[2 * j] + g[2 * j + 1];
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    sum += pair;
    prev = pair;
  }
  const double tau = -1.0 + 2.0 * sum / g[0];
  const double e = tau > 0 ? static_cast<double>(T) / tau : static_cast<double>(T);
  return {std::min(e, static_cast<double>(T)), false};
}

inline EssResult ess(std::span<const double> x, std::size_t burn_in) {
  if (burn_in >= x.size()) throw ContractViolation("ess: burn-in leaves no draws");
  return ess(x.subspan(burn_in));
}

// Type-7 (linear interpolation) empirical quantile.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ContractViolation("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct CoordinateSummary {
  std::string name;
  double mean = 0.0;
  double l = 0.0;
  double u = 0.0;
  double ess = 0.0;
  bool ess_degenerate = false;
  double sd = 0.0;
};

struct PosteriorSummary {
  std::vector<CoordinateSummary> coords;
  double accept_rate = 0.0;
  double level = 0.95;
  std::size_t burn_in = 0;
  std::size_t draws = 0;
};

inline PosteriorSummary summarize(const Chain& chain, std::size_t burn_in, double level = 0.95) {
  if (burn_in >= chain.length()) throw ContractViolation("summarize: empty post-burn-in sample");
  if (!(level > 0.0 && level < 1.0)) throw ContractViolation("summarize: level must lie in (0,1)");
  PosteriorSummary s;
  s.level = level;
  s.burn_in = burn_in;
  s.draws = chain.length() - burn_in;
  s.accept_rate = chain.acceptance_rate(burn_in);
  for (std::size_t j = 0; j < chain.dim(); ++j) {
    const std::vector<double> x = chain.coordinate(j, burn_in);
    CoordinateSummary c;
    c.name = chain.names[j];
    double m = 0.0;
    for (double v : x) m += v;
    c.mean = m / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - c.mean) * (v - c.mean);
    c.sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
    c.l = quantile(x, 0.5 * (1.0 - level));
    c.u = quantile(x, 1.0 - 0.5 * (1.0 - level));
    const EssResult e = ess(x);
    c.ess = e.value;
    c.ess_degenerate = e.degenerate;
    s.coords.push_back(c);
  }
  return s;
}

// Monte Carlo standard error of a posterior mean.
inline double mc_standard_error(const CoordinateSummary& c) {
  return c.ess > 0 ? c.sd / std::sqrt(c.ess) : std::numeric_limits<double>::infinity();
}

// Per-dataset summary vector: the average of per-row summaries.
inline std::vector<double> summary_stats(const Dataset& data, const FeatureSpec& spec) {
  if (data.n() < 1) throw ContractViolation("summary_stats: empty dataset");
  const std::size_t p = static_cast<std::size_t>(data.p());
  if (p / std::max<std::size_t>(spec.series_count, 1) < 3) throw ContractViolation("summary_stats: series too short");
  std::vector<double> acc(summary_width(spec), 0.0), row(p);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < p; ++j) row[j] = data.rows(i, static_cast<Eigen::Index>(j));
    const auto s = row_summaries(row.data(), p, spec);
    for (std::size_t k = 0; k < s.size(); ++k) acc[k] += s[k];
  }
  for (auto& v : acc) v /= static_cast<double>(data.n());
  return acc;
}

// Mean, log-variance, lag-1/2 autocorrelation of each species, plus their
// cross-correlation.
inline FeatureSpec lv_summary_spec() {
  FeatureSpec s;
  s.kind = FeatureSpec::Kind::summary;
  s.series_count = 2;
  s.cross_correlation = true;
  return s;
}

struct BayesFactor {
  enum class Status { ok, infinite, zero, undefined };
  double value = 0.0;
  std::size_t count1 = 0;
  std::size_t count2 = 0;
  Status status = Status::ok;
};

inline BayesFactor bayes_factor(std::span<const double> model_draws) {
  BayesFactor bf;
  for (double m : model_draws) {
    if (m == 1.0) ++bf.count1;
    else if (m == 2.0) ++bf.count2;
    else throw ContractViolation("bayes_factor: model indicators must be 1 or 2");
  }
  if (bf.count2 == 0) {
    bf.status = bf.count1 == 0 ? BayesFactor::Status::undefined : BayesFactor::Status::infinite;
    bf.value = bf.count1 == 0 ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
    return bf;
  }
  if (bf.count1 == 0) bf.status = BayesFactor::Status::zero;
  bf.value = static_cast<double>(bf.count1) / static_cast<double>(bf.count2);
  return bf;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test with the asymptotic distribution and
// Stephens' small-sample correction.
inline KsResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw ContractViolation("ks_test: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double D = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    D = std::max({D, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  const double lam = (sn + 0.12 + 0.11 / sn) * D;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lam * lam);
    p += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return {D, std::clamp(p, 0.0, 1.0)};
}

// Mean of N(mu, var) tilted by exp(theta * u).
inline double exponential_tilt_mean(double mu, double var, double u) { return mu + var * u; }

}  // namespace mhc

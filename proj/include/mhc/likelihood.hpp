#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mhc/classifier.hpp"
#include "mhc/error.hpp"
#include "mhc/features.hpp"
#include "mhc/models.hpp"
#include "mhc/rand.hpp"
#include "mhc/special.hpp"
#include "mhc/types.hpp"

namespace mhc {

// eta = sum_i log((1 - D(x_i)) / D(x_i)) with each term clipped.
inline double log_lik_ratio(const Discriminator& d, const Matrix& real_features) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < real_features.rows(); ++i) s -= d.logit(real_features.row(i));
  return s;
}

struct LogLikEstimate {
  double eta = 0.0;
  std::size_t nrep = 0;
  std::vector<double> per_rep;
  ParamPoint theta;
  bool exploded = false;
  // (seed, stream_id) of each replicate's latent source in seed mode.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> latent_ids;
};

// One replicate: the fitted discriminator and the real-data features it saw.
struct Replicate {
  Discriminator d;
  Matrix real_features;
};

inline Replicate fit_replicate(const Matrix& real, const Matrix& fake, const ClassifierSpec& cspec,
                               const FeatureSpec& fspec, RngStream& stream) {
  std::optional<PcaBasis> basis;
  auto [R, F] = build_pair_features(real, fake, fspec, &basis);
  Replicate r{fit(cspec, R, F, stream), std::move(R)};
  r.d.features = fspec;
  r.d.pca = std::move(basis);
  return r;
}

// Averages eta over one replicate per latent source, in index order.
// fit_stream is taken by value: equal arguments give equal results.
inline LogLikEstimate estimate(const ModelSpec& model, const ParamPoint& theta, const Dataset& real,
                               std::span<const LatentSource> latents, const ClassifierSpec& cspec,
                               const FeatureSpec& fspec, RngStream fit_stream) {
  if (latents.empty()) throw ContractViolation("estimate: nrep must be at least 1");
  LogLikEstimate out;
  out.nrep = latents.size();
  out.theta = theta;
  for (const LatentSource& l : latents)
    if (l.mode == LatentSource::Mode::seed) out.latent_ids.emplace_back(l.seed, l.stream_id);

  if (cspec.kind == ClassifierSpec::Kind::oracle) {
    const Discriminator d = oracle_discriminator(model, theta, model.point(cspec.oracle_theta0), cspec.eps_clip);
    const double eta = log_lik_ratio(d, real.rows);
    out.per_rep.assign(out.nrep, eta);
    out.eta = eta;
    return out;
  }

  std::vector<RngStream> fit_streams = split(fit_stream, latents.size());
  for (std::size_t r = 0; r < latents.size(); ++r) {
    Dataset fake;
    try {
      fake = simulate(model, theta, latents[r], latents[r].m);
    } catch (const ExplosionError&) {
      out.exploded = true;
      out.eta = kNegInf;
      out.per_rep.push_back(kNegInf);
      return out;
    }
    const Replicate rep = fit_replicate(real.rows, fake.rows, cspec, fspec, fit_streams[r]);
    out.per_rep.push_back(log_lik_ratio(rep.d, rep.real_features));
  }
  double s = 0.0;
  for (double v : out.per_rep) s += v;
  out.eta = s / static_cast<double>(out.per_rep.size());
  return out;
}

// Classifier contrasting fake(theta) (labelled as the reference class) with
// fake(theta_new), evaluated on the real rows: estimates
// log p_{theta_new}(X) - log p_theta(X) without using X in training.
inline double two_sample_log_ratio(const ModelSpec& model, const ParamPoint& theta, const ParamPoint& theta_new,
                                   const Dataset& real, const LatentSource& latent_cur,
                                   const LatentSource& latent_new, const ClassifierSpec& cspec,
                                   const FeatureSpec& fspec, RngStream& stream) {
  const Dataset ref = simulate(model, theta, latent_cur, latent_cur.m);
  const Dataset alt = simulate(model, theta_new, latent_new, latent_new.m);
  std::optional<PcaBasis> basis;
  auto [R, F] = build_pair_features(ref.rows, alt.rows, fspec, &basis);
  Discriminator d = fit(cspec, R, F, stream);
  d.features = fspec;
  d.pca = basis;
  return log_lik_ratio(d, build_features(real.rows, fspec, basis ? &*basis : nullptr));
}

struct ResidualDiagnostic {
  double u_theta = 0.0;
  ParamPoint theta;
  std::size_t n = 0;
  std::size_t m = 0;
};

// u = sum_i [log((1 - Dhat)/(1 - D)) - log(Dhat / D)] with D the Bayes
// classifier; real_features are the rows Dhat was built for.
inline ResidualDiagnostic posterior_residual(const ModelSpec& model, const ParamPoint& theta,
                                             const ParamPoint& theta0, const Discriminator& dhat,
                                             const Dataset& real, const Matrix& real_features) {
  const Discriminator oracle = oracle_discriminator(model, theta, theta0, dhat.eps_clip);
  if (real_features.rows() != real.n()) throw FeatureError("posterior_residual: row counts differ");
  ResidualDiagnostic r;
  r.theta = theta;
  r.n = static_cast<std::size_t>(real.n());
  r.m = dhat.n_fake;
  for (Eigen::Index i = 0; i < real.n(); ++i) {
    const double lh = dhat.logit(real_features.row(i)), lo = oracle.logit(real.rows.row(i));
    // log(1 - D) and log D from the clipped logit.
    const double l1h = -detail::softplus(lh), l0h = -detail::softplus(-lh);
    const double l1o = -detail::softplus(lo), l0o = -detail::softplus(-lo);
    r.u_theta += (l1h - l1o) - (l0h - l0o);
  }
  return r;
}

namespace detail {

inline void check_cir_theta(const ParamPoint& theta) {
  if (theta.dim() != 3) throw DomainError("cir: expected (alpha, beta, sigma)");
  for (std::size_t k = 0; k < 3; ++k)
    if (!std::isfinite(theta[k]) || !(theta[k] > 0.0))
      throw DomainError("cir: parameters must be finite and positive");
}

// log R_M for one bridge; kNegInf when the bridge leaves the support.
inline double mbb_log_weight(double x0, double x1, double alpha, double beta, double sigma, double h, int M,
                             RngStream& stream, std::vector<double>& u) {
  u.assign(static_cast<std::size_t>(M) + 1, 0.0);
  u[0] = x0;
  u[static_cast<std::size_t>(M)] = x1;
  double lw = 0.0;
  for (int m = 0; m + 1 < M; ++m) {
    const double um = u[static_cast<std::size_t>(m)];
    const double mean = um + (x1 - um) / (M - m);
    const double sd = sigma * std::sqrt(h * (M - m - 1.0) / (M - m) * um);
    const double next = mean + sd * std_normal(stream);
    u[static_cast<std::size_t>(m) + 1] = next;
    lw -= log_normal_pdf(next, mean, sd);
    if (!(next > 0.0)) return kNegInf;
  }
  for (int m = 0; m < M; ++m) {
    const double um = u[static_cast<std::size_t>(m)];
    lw += log_normal_pdf(u[static_cast<std::size_t>(m) + 1], um + h * beta * (alpha - um), sigma * std::sqrt(h * um));
  }
  return lw;
}

}  // namespace detail

// log pihat(x1 | x0) = log (1/N) sum_k R_M(u_k).
inline double mcwm_transition_log_lik(double x0, double x1, const ParamPoint& theta, double delta, int M, int N,
                                      RngStream& stream) {
  if (M < 2 || N < 1) throw ContractViolation("mcwm: need M >= 2 and N >= 1");
  detail::check_cir_theta(theta);
  if (!(x0 > 0.0) || !(x1 > 0.0)) throw DomainError("mcwm: data must be strictly positive");
  const double h = delta / M;
  std::vector<double> lw(static_cast<std::size_t>(N)), u;
  for (int k = 0; k < N; ++k)
    lw[static_cast<std::size_t>(k)] = detail::mbb_log_weight(x0, x1, theta[0], theta[1], theta[2], h, M, stream, u);
  const double v = log_sum_exp(lw) - std::log(static_cast<double>(N));
  if (std::isnan(v)) throw DomainError("mcwm: likelihood evaluated to NaN");
  return v;
}

// Sum over observations and transitions, starting from the model's x0.
inline double mcwm_log_lik(const ModelSpec& spec, const Dataset& data, const ParamPoint& theta, int M, int N,
                           RngStream& stream) {
  if (spec.id != ModelId::cir) throw UnsupportedError("mcwm_log_lik: cir only");
  detail::check_cir_theta(theta);
  if (!(data.rows.array() > 0.0).all()) throw DomainError("mcwm: data must be strictly positive");
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    double prev = spec.cir_x0;
    for (Eigen::Index t = 0; t < data.p(); ++t) {
      s += mcwm_transition_log_lik(prev, data.rows(i, t), theta, spec.cir_delta, M, N, stream);
      prev = data.rows(i, t);
    }
  }
  return s;
}

// Unbiased pseudo-marginal likelihood: average over K fresh latent paths of
// the conditional Poisson likelihood of each observed series.
inline double ricker_pm_log_lik(const ModelSpec& spec, const Dataset& data, const ParamPoint& theta, int K,
                                RngStream& stream) {
  if (spec.id != ModelId::ricker) throw UnsupportedError("ricker_pm_log_lik: ricker only");
  if (K < 1) throw ContractViolation("ricker_pm_log_lik: K must be at least 1");
  detail::check_theta(spec, theta);
  const double log_r = theta[0], sd = std::sqrt(theta[1]), phi = theta[2];
  std::vector<double> lw(static_cast<std::size_t>(K));
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (int k = 0; k < K; ++k) {
      double logN = std::log(spec.ricker_N0), w = 0.0;
      for (Eigen::Index t = 0; t < data.p(); ++t) {
        logN = log_r + logN - std::exp(logN) + sd * std_normal(stream);
        w += log_poisson_pmf(data.rows(i, t), phi * std::exp(logN));
      }
      lw[static_cast<std::size_t>(k)] = w;
    }
    s += log_sum_exp(lw) - std::log(static_cast<double>(K));
  }
  if (std::isnan(s)) throw DomainError("ricker_pm_log_lik: NaN likelihood");
  return s;
}

}  // namespace mhc

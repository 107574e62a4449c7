#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mhc/chain.hpp"
#include "mhc/classifier.hpp"
#include "mhc/error.hpp"
#include "mhc/features.hpp"
#include "mhc/likelihood.hpp"
#include "mhc/models.hpp"
#include "mhc/priors.hpp"
#include "mhc/rand.hpp"
#include "mhc/special.hpp"

namespace mhc {

struct Proposed {
  std::vector<double> theta;
  double log_q_ratio = 0.0;  // log q(theta | theta') - log q(theta' | theta)
};

struct Proposal {
  // gaussian_rw: theta_j + scale_j * z.
  // log_gaussian_rw: theta_j * exp(scale_j * z).
  // uniform_window_blocked: (alpha, beta, sigma); with probability joint_prob
  //   move (alpha, beta) jointly by U(-w, w) each, otherwise sigma alone.
  // per_coord_mixed: Ricker (log r, sigma2, phi); each coordinate drawn with
  //   mean at the current value and variance mixed_variance (normal,
  //   inverse-gamma, gamma).
  // discrete_flip_plus_rw: (model, mu); flip the model with probability
  //   flip_prob, otherwise mu + scale_1 * z.
  enum class Kind { gaussian_rw, log_gaussian_rw, uniform_window_blocked, per_coord_mixed, discrete_flip_plus_rw };
  Kind kind = Kind::gaussian_rw;
  std::vector<double> scales;
  double joint_prob = 2.0 / 3.0;
  double flip_prob = 0.5;
  double mixed_variance = 1.0;

  static Proposal gaussian(std::vector<double> s) {
    Proposal p;
    p.kind = Kind::gaussian_rw;
    p.scales = std::move(s);
    return p;
  }
  static Proposal log_gaussian(std::vector<double> s) {
    Proposal p;
    p.kind = Kind::log_gaussian_rw;
    p.scales = std::move(s);
    return p;
  }
  static Proposal cir_blocked(double w) {
    Proposal p;
    p.kind = Kind::uniform_window_blocked;
    p.scales = {w, w, w};
    return p;
  }
  static Proposal ricker_mixed(double variance) {
    Proposal p;
    p.kind = Kind::per_coord_mixed;
    p.mixed_variance = variance;
    return p;
  }
  static Proposal model_choice(double mu_scale = 0.1) {
    Proposal p;
    p.kind = Kind::discrete_flip_plus_rw;
    p.scales = {0.0, mu_scale};
    return p;
  }

  void validate(std::size_t dim) const {
    switch (kind) {
      case Kind::gaussian_rw:
      case Kind::log_gaussian_rw:
        if (scales.size() != dim) throw ConfigError("proposal: need one scale per parameter");
        break;
      case Kind::uniform_window_blocked:
        if (dim != 3 || scales.size() != 3) throw ConfigError("proposal: blocked windows need three parameters");
        if (!(joint_prob >= 0 && joint_prob <= 1)) throw ConfigError("proposal: joint_prob outside [0, 1]");
        break;
      case Kind::per_coord_mixed:
        if (dim != 3) throw ConfigError("proposal: per_coord_mixed needs (log_r, sigma2, phi)");
        if (!(mixed_variance > 0)) throw ConfigError("proposal: mixed variance must be positive");
        return;
      case Kind::discrete_flip_plus_rw:
        if (dim != 2 || scales.size() != 2) throw ConfigError("proposal: flip_plus_rw needs (model, mu)");
        if (!(flip_prob >= 0 && flip_prob <= 1)) throw ConfigError("proposal: flip_prob outside [0, 1]");
        break;
    }
    for (double s : scales)
      if (!(s >= 0) || !std::isfinite(s)) throw ConfigError("proposal: scales must be finite and nonnegative");
  }

  // log q(to | from); kNegInf when unreachable.
  double log_density(const std::vector<double>& from, const std::vector<double>& to) const {
    switch (kind) {
      case Kind::gaussian_rw: {
        double s = 0.0;
        for (std::size_t j = 0; j < from.size(); ++j) s += rw_term(to[j], from[j], scales[j]);
        return s;
      }
      case Kind::log_gaussian_rw: {
        double s = 0.0;
        for (std::size_t j = 0; j < from.size(); ++j) {
          if (!(to[j] > 0) || !(from[j] > 0)) return kNegInf;
          s += rw_term(std::log(to[j]), std::log(from[j]), scales[j]) - std::log(to[j]);
        }
        return s;
      }
      case Kind::uniform_window_blocked: {
        const auto inside = [&](std::size_t j) { return std::fabs(to[j] - from[j]) <= scales[j]; };
        const bool sigma_same = to[2] == from[2], ab_same = to[0] == from[0] && to[1] == from[1];
        double s = kNegInf;
        if (sigma_same && inside(0) && inside(1))
          s = std::log(joint_prob) - std::log(2 * scales[0]) - std::log(2 * scales[1]);
        else if (ab_same && inside(2))
          s = std::log1p(-joint_prob) - std::log(2 * scales[2]);
        return s;
      }
      case Kind::per_coord_mixed: {
        const double v = mixed_variance;
        double s = log_normal_pdf(to[0], from[0], std::sqrt(v));
        const double m2 = from[1], a = 2.0 + m2 * m2 / v, b = m2 * (a - 1.0);
        s += log_inverse_gamma_pdf(to[1], a, b);
        const double m3 = from[2];
        s += log_gamma_pdf(to[2], m3 * m3 / v, m3 / v);
        return s;
      }
      case Kind::discrete_flip_plus_rw: {
        if (to[0] != from[0]) return to[1] == from[1] ? std::log(flip_prob) : kNegInf;
        return std::log1p(-flip_prob) + rw_term(to[1], from[1], scales[1]);
      }
    }
    return kNegInf;
  }

  Proposed propose(const std::vector<double>& th, RngStream& s) const {
    std::vector<double> t = th;
    switch (kind) {
      case Kind::gaussian_rw:
        for (std::size_t j = 0; j < t.size(); ++j) t[j] += scales[j] * std_normal(s);
        return {t, 0.0};
      case Kind::log_gaussian_rw: {
        double lq = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) {
          t[j] = th[j] * std::exp(scales[j] * std_normal(s));
          lq += std::log(t[j]) - std::log(th[j]);
        }
        return {t, lq};
      }
      case Kind::uniform_window_blocked:
        if (s.uniform01() < joint_prob) {
          t[0] += scales[0] * (2.0 * s.uniform01() - 1.0);
          t[1] += scales[1] * (2.0 * s.uniform01() - 1.0);
        } else {
          t[2] += scales[2] * (2.0 * s.uniform01() - 1.0);
        }
        return {t, 0.0};
      case Kind::per_coord_mixed: {
        const double v = mixed_variance;
        if (!(th[1] > 0) || !(th[2] > 0)) throw ContractViolation("proposal: sigma2 and phi must be positive");
        t[0] = th[0] + std::sqrt(v) * std_normal(s);
        const double a = 2.0 + th[1] * th[1] / v;
        t[1] = th[1] * (a - 1.0) / std_gamma(s, a);
        t[2] = std_gamma(s, th[2] * th[2] / v) * v / th[2];
        return {t, log_density(t, th) - log_density(th, t)};
      }
      case Kind::discrete_flip_plus_rw:
        if (s.uniform01() < flip_prob)
          t[0] = th[0] == 1.0 ? 2.0 : 1.0;
        else
          t[1] += scales[1] * std_normal(s);
        return {t, 0.0};
    }
    return {t, 0.0};
  }

 private:
  static double rw_term(double to, double from, double sd) {
    if (sd == 0.0) return to == from ? 0.0 : kNegInf;
    return log_normal_pdf(to, from, sd);
  }
  static double log_gamma_pdf(double x, double shape, double rate) {
    if (!(x > 0) || !(shape > 0) || !(rate > 0)) return kNegInf;
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1) * std::log(x) - rate * x;
  }
  static double log_inverse_gamma_pdf(double x, double a, double b) {
    if (!(x > 0) || !(a > 0) || !(b > 0)) return kNegInf;
    return a * std::log(b) - std::lgamma(a) - (a + 1) * std::log(x) - b / x;
  }
};

inline std::string to_string(Proposal::Kind k) {
  switch (k) {
    case Proposal::Kind::gaussian_rw: return "gaussian_rw";
    case Proposal::Kind::log_gaussian_rw: return "log_gaussian_rw";
    case Proposal::Kind::uniform_window_blocked: return "uniform_window_blocked";
    case Proposal::Kind::per_coord_mixed: return "per_coord_mixed";
    case Proposal::Kind::discrete_flip_plus_rw: return "discrete_flip_plus_rw";
  }
  return "?";
}

inline Proposal::Kind proposal_kind_from_string(const std::string& s) {
  for (auto k : {Proposal::Kind::gaussian_rw, Proposal::Kind::log_gaussian_rw, Proposal::Kind::uniform_window_blocked,
                 Proposal::Kind::per_coord_mixed, Proposal::Kind::discrete_flip_plus_rw})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown proposal kind: " + s);
}

// min{exp(dll + dlp + lqr), 1}. A -inf in the new state rejects; a -inf
// in the old state (and none in the new) accepts.
inline double accept_prob(double log_lik_new, double log_lik_old, double log_prior_new, double log_prior_old,
                          double log_q_ratio) {
  for (double v : {log_lik_new, log_lik_old, log_prior_new, log_prior_old, log_q_ratio})
    if (std::isnan(v) || v == kPosInf) throw ContractViolation("accept_prob: inputs must be finite or -inf");
  if (log_lik_new == kNegInf || log_prior_new == kNegInf || log_q_ratio == kNegInf) return 0.0;
  if (log_lik_old == kNegInf || log_prior_old == kNegInf) return 1.0;
  const double a = (log_lik_new - log_lik_old) + (log_prior_new - log_prior_old) + log_q_ratio;
  return a >= 0.0 ? 1.0 : std::exp(a);
}

struct SamplerConfig {
  std::size_t T = 1000;
  std::size_t m = 0;  // fake sample size; 0 means m = n
  std::size_t nrep = 1;
  std::vector<double> init;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::function<void(const std::string&)> warn;  // step failures
};

namespace detail {

inline void report(const SamplerConfig& cfg, const std::string& msg) {
  if (cfg.warn) cfg.warn(msg);
}

inline Chain start_chain(const std::string& algorithm, const ModelSpec& model, const SamplerConfig& cfg) {
  if (cfg.T < 1) throw ConfigError("sampler: T must be at least 1");
  if (cfg.init.size() != model.dim()) throw ConfigError("sampler: init has the wrong dimension");
  Chain c;
  c.algorithm = algorithm;
  c.model = to_string(model.id);
  c.names = model.param_names();
  c.discrete = model.discrete();
  c.init = cfg.init;
  c.seed = cfg.seed;
  c.stream_id = cfg.stream_id;
  c.reserve(cfg.T);
  return c;
}

// Stream layout shared by every MH kernel so that decisions line up across
// algorithms: [0] proposals and uniforms, [1] fixed latents, [2] fixed fit
// stream, [3] one child per step (drawn before the init evaluation too).
inline std::vector<RngStream> kernel_streams(const SamplerConfig& cfg) {
  RngStream root(cfg.seed, cfg.stream_id);
  return split(root, 4);
}

// log-likelihood evaluator: theta and the step's child stream.
using LogLikFn = std::function<double(const std::vector<double>&, RngStream&)>;

// Generic MH loop. With refresh_current the current state's value is
// re-evaluated on every step (MCWM); otherwise it is carried.
inline Chain run_metropolis(Chain chain, const Prior& prior, const Proposal& proposal, const LogLikFn& log_lik,
                            bool refresh_current, const SamplerConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<RngStream> st = kernel_streams(cfg);
  std::vector<double> th = cfg.init;
  double lp = prior.log_density(th);
  if (lp == kNegInf) throw SupportError("sampler: init outside the prior support");
  const auto eval = [&](const std::vector<double>& x, RngStream& s, double& out) {
    try {
      out = log_lik(x, s);
      if (std::isnan(out) || out == kPosInf) throw DomainError("non-finite log-likelihood");
      return true;
    } catch (const ContractViolation&) {
      throw;
    } catch (const Error& e) {
      report(cfg, std::string("step failed: ") + e.what());
      return false;
    }
  };
  double ll = kNegInf;
  {
    RngStream s = split_one(st[3]);
    if (!eval(th, s, ll)) throw Error("sampler: likelihood evaluation failed at init");
  }
  for (std::size_t t = 0; t < cfg.T; ++t) {
    RngStream step = split_one(st[3]);
    const Proposed p = proposal.propose(th, st[0]);
    const double u = st[0].uniform01();
    const double lp_new = prior.log_density(p.theta);
    bool acc = false;
    if (lp_new != kNegInf && p.log_q_ratio != kNegInf) {
      double ll_cur = ll, ll_new = kNegInf;
      bool ok = true;
      if (refresh_current) ok = eval(th, step, ll_cur);
      ok = ok && eval(p.theta, step, ll_new);
      if (!ok) {
        ++chain.failed_steps;
      } else {
        if (refresh_current) ll = ll_cur;
        acc = u < accept_prob(ll_new, ll_cur, lp_new, lp, p.log_q_ratio);
        if (acc) {
          th = p.theta;
          ll = ll_new;
          lp = lp_new;
        }
      }
    }
    chain.push(th, ll, lp, acc);
  }
  chain.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return chain;
}

inline std::vector<LatentSource> draw_latents(const ModelSpec& model, std::size_t m, std::size_t nrep,
                                              RngStream& s) {
  std::vector<LatentSource> out;
  for (std::size_t r = 0; r < nrep; ++r) out.push_back(draw_latent(model, m, s));
  return out;
}

}  // namespace detail

enum class MhcMode { fixed, random, two_sample };

inline std::string to_string(MhcMode m) {
  switch (m) {
    case MhcMode::fixed: return "mhc_fixed";
    case MhcMode::random: return "mhc_random";
    case MhcMode::two_sample: return "two_sample";
  }
  return "?";
}

// fixed: one set of latents and one fit stream for the whole run.
// random: fresh latents each step (independent refresh); the current
//   state's estimate is carried.
// two_sample: each step fits a classifier between fake(theta) and
//   fake(theta') and uses it as the log-likelihood ratio; log_lik_est holds
//   the running sum of accepted ratios.
inline Chain run_mhc(MhcMode mode, const ModelSpec& model, const Dataset& real, const Prior& prior,
                     const Proposal& proposal, const ClassifierSpec& cspec, const FeatureSpec& fspec,
                     const SamplerConfig& cfg) {
  model.validate();
  proposal.validate(model.dim());
  cspec.validate();
  if (cfg.nrep < 1) throw ConfigError("sampler: nrep must be at least 1");
  const std::size_t m = cfg.m ? cfg.m : static_cast<std::size_t>(real.n());
  Chain chain = detail::start_chain(to_string(mode), model, cfg);

  if (mode == MhcMode::two_sample) {
    if (cspec.kind == ClassifierSpec::Kind::oracle) throw UnsupportedError("two_sample: needs a fitted classifier");
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<RngStream> st = detail::kernel_streams(cfg);
    std::vector<double> th = cfg.init;
    double lp = prior.log_density(th), total = 0.0;
    if (lp == kNegInf) throw SupportError("sampler: init outside the prior support");
    split_one(st[3]);
    for (std::size_t t = 0; t < cfg.T; ++t) {
      RngStream step = split_one(st[3]);
      const Proposed p = proposal.propose(th, st[0]);
      const double u = st[0].uniform01();
      const double lp_new = prior.log_density(p.theta);
      bool acc = false;
      if (lp_new != kNegInf && p.log_q_ratio != kNegInf) {
        double delta = 0.0;
        try {
          for (std::size_t r = 0; r < cfg.nrep; ++r) {
            const LatentSource a = draw_latent(model, m, step), b = draw_latent(model, m, step);
            RngStream fs = split_one(step);
            delta += two_sample_log_ratio(model, model.point(th), model.point(p.theta), real, a, b, cspec, fspec,
                                          fs);
          }
          delta /= static_cast<double>(cfg.nrep);
        } catch (const ExplosionError&) {
          delta = kNegInf;
        } catch (const ContractViolation&) {
          throw;
        } catch (const Error& e) {
          detail::report(cfg, std::string("step failed: ") + e.what());
          ++chain.failed_steps;
          chain.push(th, total, lp, false);
          continue;
        }
        acc = u < accept_prob(delta, 0.0, lp_new, lp, p.log_q_ratio);
        if (acc) {
          th = p.theta;
          lp = lp_new;
          total += delta;
        }
      }
      chain.push(th, total, lp, acc);
    }
    chain.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return chain;
  }

  std::vector<RngStream> st = detail::kernel_streams(cfg);
  std::vector<LatentSource> fixed_latents;
  if (mode == MhcMode::fixed) fixed_latents = detail::draw_latents(model, m, cfg.nrep, st[1]);
  const RngStream fixed_fit = st[2];
  const auto log_lik = [&](const std::vector<double>& th, RngStream& step) {
    const ParamPoint p = model.point(th);
    if (mode == MhcMode::fixed) return estimate(model, p, real, fixed_latents, cspec, fspec, fixed_fit).eta;
    const std::vector<LatentSource> lat = detail::draw_latents(model, m, cfg.nrep, step);
    return estimate(model, p, real, lat, cspec, fspec, split_one(step)).eta;
  };
  return detail::run_metropolis(std::move(chain), prior, proposal, log_lik, false, cfg);
}

inline Chain run_exact_mh(const ModelSpec& model, const Dataset& real, const Prior& prior, const Proposal& proposal,
                          const SamplerConfig& cfg) {
  model.validate();
  proposal.validate(model.dim());
  if (!model.has_oracle_density()) throw UnavailableError(to_string(model.id) + ": no exact likelihood");
  Chain chain = detail::start_chain("exact_mh", model, cfg);
  const auto log_lik = [&](const std::vector<double>& th, RngStream&) {
    return *oracle_log_lik(model, model.point(th), real);
  };
  return detail::run_metropolis(std::move(chain), prior, proposal, log_lik, false, cfg);
}

// MH with an arbitrary log-likelihood (tests and ablations).
inline Chain run_generic_mh(const std::string& algorithm, const ModelSpec& model, const Prior& prior,
                            const Proposal& proposal, const detail::LogLikFn& log_lik, bool refresh_current,
                            const SamplerConfig& cfg) {
  proposal.validate(model.dim());
  return detail::run_metropolis(detail::start_chain(algorithm, model, cfg), prior, proposal, log_lik,
                                refresh_current, cfg);
}

struct McwmOptions {
  int M = 2;
  int N = 4;  // cir bridges per transition
  int K = 0;  // ricker paths per series; 0 means 20 n
};

// Both the current and the proposed log-likelihood are re-estimated on
// every step.
inline Chain run_mcwm(const ModelSpec& model, const Dataset& real, const Prior& prior, const Proposal& proposal,
                      const McwmOptions& opt, const SamplerConfig& cfg) {
  model.validate();
  proposal.validate(model.dim());
  detail::LogLikFn log_lik;
  if (model.id == ModelId::cir) {
    if (opt.M < 2 || opt.N < 1) throw ConfigError("mcwm: need M >= 2 and N >= 1");
    log_lik = [&](const std::vector<double>& th, RngStream& s) {
      return mcwm_log_lik(model, real, model.point(th), opt.M, opt.N, s);
    };
  } else if (model.id == ModelId::ricker) {
    const int K = opt.K > 0 ? opt.K : static_cast<int>(20 * real.n());
    log_lik = [&, K](const std::vector<double>& th, RngStream& s) {
      return ricker_pm_log_lik(model, real, model.point(th), K, s);
    };
  } else {
    throw UnsupportedError(to_string(model.id) + ": no conditional-latent structure");
  }
  return detail::run_metropolis(detail::start_chain("mcwm", model, cfg), prior, proposal, log_lik, true, cfg);
}

// Keeps draws from burn_in on.
inline Chain trim(const Chain& c, std::size_t burn_in) {
  if (burn_in >= c.length()) throw ContractViolation("trim: burn-in leaves no draws");
  Chain out = c;
  const auto b = static_cast<std::ptrdiff_t>(burn_in);
  out.draws.assign(c.draws.begin() + b, c.draws.end());
  out.log_lik_est.assign(c.log_lik_est.begin() + b, c.log_lik_est.end());
  out.log_prior.assign(c.log_prior.begin() + b, c.log_prior.end());
  out.accepted.assign(c.accepted.begin() + b, c.accepted.end());
  return out;
}

// theta(t) = theta1(t) - mean(theta1) + mean(theta2), per coordinate.
inline Chain debias(const Chain& c1, const Chain& c2) {
  if (c1.length() != c2.length() || c1.length() == 0) throw ContractViolation("debias: chains differ in length");
  if (c1.dim() != c2.dim()) throw ContractViolation("debias: chains differ in dimension");
  for (const auto& c : {&c1, &c2})
    for (bool d : c->discrete)
      if (d) throw UnsupportedError("debias: discrete parameters have no bias correction");
  Chain out = c1;
  out.algorithm = "mhc_debias";
  const double T = static_cast<double>(c1.length());
  for (std::size_t j = 0; j < c1.dim(); ++j) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t t = 0; t < c1.length(); ++t) {
      m1 += c1.draws[t][j];
      m2 += c2.draws[t][j];
    }
    const double shift = m2 / T - m1 / T;
    for (auto& d : out.draws) d[j] += shift;
  }
  out.wall_clock_seconds = c1.wall_clock_seconds + c2.wall_clock_seconds;
  out.failed_steps = c1.failed_steps + c2.failed_steps;
  return out;
}

struct AbcResult {
  std::vector<std::string> names;
  std::vector<std::vector<double>> draws;  // all M draws
  std::vector<double> distances;           // +inf for exploded simulations
  std::vector<std::size_t> accepted;       // indices, ascending distance
  std::vector<double> observed;            // observed summaries
  std::vector<double> scale;               // per-summary standardization

  std::vector<std::vector<double>> accepted_draws() const {
    std::vector<std::vector<double>> out;
    for (std::size_t i : accepted) out.push_back(draws[i]);
    return out;
  }
};

using Simulator = std::function<Dataset(const std::vector<double>&, RngStream&)>;
using Summarizer = std::function<std::vector<double>(const Dataset&)>;

// Rejection ABC: M prior draws, keep the r closest in standardized
// Euclidean summary distance. Scales are pilot standard deviations.
inline AbcResult run_abc(const Simulator& sim, const Summarizer& summ, const Prior& prior, const Dataset& real,
                         std::size_t M, std::size_t r, RngStream& stream, std::size_t pilot = 200) {
  if (!prior.proper()) throw UnsupportedError("abc requires proper prior");
  if (r < 1 || r > M) throw ConfigError("abc: need 1 <= r <= M");
  std::vector<RngStream> st = split(stream, 3);
  AbcResult out;
  out.observed = summ(real);
  const std::size_t S = out.observed.size();

  std::vector<std::vector<double>> pool;
  for (std::size_t i = 0; i < pilot; ++i) {
    const std::vector<double> th = prior.draw(st[0]);
    RngStream s = split_one(st[0]);
    try {
      pool.push_back(summ(sim(th, s)));
    } catch (const ExplosionError&) {
    }
  }
  out.scale.assign(S, 1.0);
  if (pool.size() >= 2) {
    for (std::size_t k = 0; k < S; ++k) {
      double mean = 0.0, ss = 0.0;
      for (const auto& v : pool) mean += v[k];
      mean /= static_cast<double>(pool.size());
      for (const auto& v : pool) ss += (v[k] - mean) * (v[k] - mean);
      const double sd = std::sqrt(ss / static_cast<double>(pool.size() - 1));
      if (sd > 0 && std::isfinite(sd)) out.scale[k] = sd;
    }
  }

  out.draws.reserve(M);
  out.distances.reserve(M);
  for (std::size_t i = 0; i < M; ++i) {
    std::vector<double> th = prior.draw(st[1]);
    RngStream s = split_one(st[1]);
    double d = kPosInf;
    try {
      const std::vector<double> v = summ(sim(th, s));
      d = 0.0;
      for (std::size_t k = 0; k < S; ++k) {
        const double z = (v[k] - out.observed[k]) / out.scale[k];
        d += z * z;
      }
      d = std::sqrt(d);
      if (std::isnan(d)) d = kPosInf;
    } catch (const ExplosionError&) {
    }
    out.draws.push_back(std::move(th));
    out.distances.push_back(d);
  }
  std::vector<std::size_t> idx(M);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return out.distances[a] < out.distances[b]; });
  out.accepted.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(r));
  return out;
}

// ABC on a model: fake data sets of the real sample size.
inline AbcResult run_abc(const ModelSpec& model, const Summarizer& summ, const Prior& prior, const Dataset& real,
                         std::size_t M, std::size_t r, RngStream& stream) {
  model.validate();
  const std::size_t n = static_cast<std::size_t>(real.n());
  const Simulator sim = [&](const std::vector<double>& th, RngStream& s) {
    const LatentSource l = draw_latent(model, n, s);
    return simulate(model, model.point(th), l, n);
  };
  AbcResult res = run_abc(sim, summ, prior, real, M, r, stream);
  res.names = model.param_names();
  return res;
}

}  // namespace mhc

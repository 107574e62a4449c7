#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mhc/error.hpp"
#include "mhc/rand.hpp"
#include "mhc/special.hpp"
#include "mhc/types.hpp"

namespace mhc {

enum class ModelId { normal_ls, ricker, lotka_volterra, cir, gauss_choice };

inline std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::normal_ls: return "normal_ls";
    case ModelId::ricker: return "ricker";
    case ModelId::lotka_volterra: return "lotka_volterra";
    case ModelId::cir: return "cir";
    case ModelId::gauss_choice: return "gauss_choice";
  }
  return "?";
}

inline ModelId model_id_from_string(const std::string& s) {
  for (ModelId id : {ModelId::normal_ls, ModelId::ricker, ModelId::lotka_volterra, ModelId::cir,
                     ModelId::gauss_choice})
    if (to_string(id) == s) return id;
  throw ConfigError("unknown model id: " + s);
}

struct LatentSource {
  enum class Mode { array, seed };
  Mode mode = Mode::array;
  Matrix array;  // m x latent width, array mode
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::size_t m = 0;
};

struct ModelSpec {
  ModelId id = ModelId::normal_ls;

  std::size_t ricker_T = 20;
  double ricker_N0 = 1.0;

  double lv_X0 = 50.0;  // predators
  double lv_Y0 = 100.0;  // prey
  double lv_horizon = 20.0;
  double lv_dt = 0.1;
  double lv_cap = 1e7;

  std::size_t cir_T = 500;
  double cir_delta = 1.0;
  double cir_x0 = 0.1;

  // n in the model-2 variance 1 + 3/sqrt(n).
  std::size_t gc_n = 500;

  static ModelSpec make(ModelId id) {
    ModelSpec s;
    s.id = id;
    return s;
  }

  std::size_t dim() const {
    switch (id) {
      case ModelId::normal_ls: return 2;
      case ModelId::ricker: return 3;
      case ModelId::lotka_volterra: return 4;
      case ModelId::cir: return 3;
      case ModelId::gauss_choice: return 2;
    }
    return 0;
  }

  std::vector<std::string> param_names() const {
    switch (id) {
      case ModelId::normal_ls: return {"mu", "sigma2"};
      case ModelId::ricker: return {"log_r", "sigma2", "phi"};
      case ModelId::lotka_volterra: return {"theta1", "theta2", "theta3", "theta4"};
      case ModelId::cir: return {"alpha", "beta", "sigma"};
      case ModelId::gauss_choice: return {"model", "mu"};
    }
    return {};
  }

  std::vector<Interval> support() const {
    const Interval R = Interval::real_line(), P = Interval::positive(), N = Interval::nonnegative();
    switch (id) {
      case ModelId::normal_ls: return {R, P};
      case ModelId::ricker: return {R, P, N};
      case ModelId::lotka_volterra: return {N, N, N, N};
      case ModelId::cir: return {P, P, P};
      case ModelId::gauss_choice: return {Interval::closed(1.0, 2.0), R};
    }
    return {};
  }

  std::vector<bool> discrete() const {
    std::vector<bool> d(dim(), false);
    if (id == ModelId::gauss_choice) d[0] = true;
    return d;
  }

  ParamPoint point(std::vector<double> values) const {
    if (values.size() != dim())
      throw SupportError(to_string(id) + ": expected " + std::to_string(dim()) + " parameters");
    return ParamPoint{std::move(values), param_names(), support()};
  }

  std::size_t lv_T() const { return static_cast<std::size_t>(std::llround(lv_horizon / lv_dt)) + 1; }

  std::size_t row_width() const {
    switch (id) {
      case ModelId::normal_ls:
      case ModelId::gauss_choice: return 1;
      case ModelId::ricker: return ricker_T;
      case ModelId::lotka_volterra: return 2 * lv_T();
      case ModelId::cir: return cir_T;
    }
    return 0;
  }

  // Number of concatenated series in a row.
  std::size_t series_count() const { return id == ModelId::lotka_volterra ? 2 : 1; }

  std::vector<std::string> columns() const {
    std::vector<std::string> c;
    switch (id) {
      case ModelId::normal_ls:
      case ModelId::gauss_choice: c.push_back("X"); break;
      case ModelId::ricker:
        for (std::size_t t = 1; t <= ricker_T; ++t) c.push_back("X_" + std::to_string(t));
        break;
      case ModelId::cir:
        for (std::size_t t = 1; t <= cir_T; ++t) c.push_back("X_" + std::to_string(t));
        break;
      case ModelId::lotka_volterra:
        for (std::size_t t = 1; t <= lv_T(); ++t) c.push_back("X_" + std::to_string(t));
        for (std::size_t t = 1; t <= lv_T(); ++t) c.push_back("Y_" + std::to_string(t));
        break;
    }
    return c;
  }

  std::string layout() const {
    switch (id) {
      case ModelId::normal_ls:
      case ModelId::gauss_choice: return "scalar";
      case ModelId::ricker: return "series T=" + std::to_string(ricker_T);
      case ModelId::cir: return "series T=" + std::to_string(cir_T);
      case ModelId::lotka_volterra: return "two series (predator X, prey Y) T=" + std::to_string(lv_T());
    }
    return "";
  }

  bool has_oracle_density() const {
    return id == ModelId::normal_ls || id == ModelId::cir || id == ModelId::gauss_choice;
  }

  LatentSource::Mode latent_mode() const {
    return (id == ModelId::lotka_volterra || id == ModelId::cir) ? LatentSource::Mode::seed
                                                                 : LatentSource::Mode::array;
  }

  // Per-observation latent length in array mode.
  std::size_t latent_width() const {
    switch (id) {
      case ModelId::normal_ls:
      case ModelId::gauss_choice: return 1;
      case ModelId::ricker: return 2 * ricker_T;
      default: return 0;
    }
  }

  double gc_variance(int model) const {
    return model == 1 ? 1.0 : 1.0 + 3.0 / std::sqrt(static_cast<double>(gc_n));
  }

  void validate() const {
    auto bad = [&](const char* what) { throw ConfigError(to_string(id) + ": " + what); };
    if (ricker_T < 1 || !(ricker_N0 > 0)) bad("ricker constants must be positive");
    if (!(lv_X0 >= 0) || !(lv_Y0 >= 0) || !(lv_horizon > 0) || !(lv_dt > 0) || !(lv_cap > 0))
      bad("lotka_volterra constants must be positive");
    if (cir_T < 1 || !(cir_delta > 0) || !(cir_x0 > 0)) bad("cir constants must be positive");
    if (gc_n < 1) bad("gauss_choice n must be positive");
  }
};

// Feller condition 2*alpha*beta >= sigma^2 keeps the CIR process off zero.
inline std::optional<std::string> feller_warning(const ModelSpec& spec, const ParamPoint& theta) {
  if (spec.id != ModelId::cir) return std::nullopt;
  const double a = theta[0], b = theta[1], s = theta[2];
  if (2.0 * a * b >= s * s) return std::nullopt;
  return "cir: Feller condition 2*alpha*beta >= sigma^2 violated (" + std::to_string(2.0 * a * b) + " < " +
         std::to_string(s * s) + ")";
}

namespace detail {

inline void check_theta(const ModelSpec& spec, const ParamPoint& theta) {
  if (theta.dim() != spec.dim()) throw SupportError(to_string(spec.id) + ": parameter dimension mismatch");
  for (std::size_t i = 0; i < theta.dim(); ++i)
    if (!spec.support()[i].contains(theta[i]) || !std::isfinite(theta[i]))
      throw SupportError(to_string(spec.id) + ": parameter " + spec.param_names()[i] + " = " +
                         std::to_string(theta[i]) + " outside support");
  if (spec.id == ModelId::gauss_choice && theta[0] != 1.0 && theta[0] != 2.0)
    throw SupportError("gauss_choice: model indicator must be 1 or 2");
}

// Child stream of observation i in seed mode; independent of m.
inline RngStream observation_stream(const LatentSource& latent, std::size_t i) {
  return RngStream(latent.seed, mix_ids(latent.stream_id, 0x0B5E7A7104ULL, i));
}

struct CirTransition {
  double c, df, decay;
  CirTransition(double alpha, double beta, double sigma, double delta) {
    decay = std::exp(-beta * delta);
    c = sigma * sigma * (1.0 - decay) / (4.0 * beta);
    df = 4.0 * alpha * beta / (sigma * sigma);
  }
  double noncentrality(double x) const { return x * decay / c; }
};

}  // namespace detail

// One Gillespie event, reported to path observers.
struct LvEvent {
  double time;        // event time
  double wait;        // inter-event time
  double total_rate;  // sum of rates before the event
  int reaction;       // 0 predator birth, 1 predator death, 2 prey birth, 3 prey death
  double X, Y;        // state after the event
};

// Gillespie path recorded on the grid 0, dt, 2dt, ...; writes T values into
// xs and ys. Extinction pads with the absorbing state.
template <class Observer>
void lv_path(const ModelSpec& spec, const std::vector<double>& th, RngStream& rng, double* xs, double* ys,
             Observer&& observe) {
  const std::size_t T = spec.lv_T();
  double X = spec.lv_X0, Y = spec.lv_Y0, t = 0.0;
  std::size_t g = 0;
  for (;;) {
    const double r1 = th[0] * X * Y, r2 = th[1] * X, r3 = th[2] * Y, r4 = th[3] * X * Y;
    const double R = r1 + r2 + r3 + r4;
    if (!(R > 0.0)) {
      for (; g < T; ++g) xs[g] = X, ys[g] = Y;
      return;
    }
    const double wait = -std::log(rng.uniform01()) / R;
    const double tn = t + wait;
    while (g < T && static_cast<double>(g) * spec.lv_dt < tn) {
      xs[g] = X;
      ys[g] = Y;
      ++g;
    }
    if (g == T) return;
    const double v = rng.uniform01() * R;
    int reaction;
    if (v < r1) {
      X += 1.0;
      reaction = 0;
    } else if (v < r1 + r2) {
      X -= 1.0;
      reaction = 1;
    } else if (v < r1 + r2 + r3) {
      Y += 1.0;
      reaction = 2;
    } else {
      Y -= 1.0;
      reaction = 3;
    }
    observe(LvEvent{tn, wait, R, reaction, X, Y});
    if (X + Y > spec.lv_cap)
      throw ExplosionError("lotka_volterra: population exceeded cap " + std::to_string(spec.lv_cap), g);
    t = tn;
  }
}

inline Dataset empty_dataset(const ModelSpec& spec, std::size_t m) {
  Dataset d;
  d.rows.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(spec.row_width()));
  d.columns = spec.columns();
  d.layout = spec.layout();
  return d;
}

inline Dataset simulate(const ModelSpec& spec, const ParamPoint& theta, const LatentSource& latent, std::size_t m) {
  detail::check_theta(spec, theta);
  if (m < 1) throw LatentError("simulate: m must be at least 1");
  if (latent.mode != spec.latent_mode())
    throw LatentError(to_string(spec.id) + ": latent source has the wrong mode");
  if (latent.mode == LatentSource::Mode::array) {
    if (static_cast<std::size_t>(latent.array.rows()) < m ||
        static_cast<std::size_t>(latent.array.cols()) != spec.latent_width())
      throw LatentError(to_string(spec.id) + ": latent array has the wrong shape");
  }
  Dataset d = empty_dataset(spec, m);
  const Eigen::Index M = static_cast<Eigen::Index>(m);
  switch (spec.id) {
    case ModelId::normal_ls: {
      const double mu = theta[0], sd = std::sqrt(theta[1]);
      for (Eigen::Index i = 0; i < M; ++i) d.rows(i, 0) = mu + sd * latent.array(i, 0);
      break;
    }
    case ModelId::gauss_choice: {
      const double mu = theta[1], sd = std::sqrt(spec.gc_variance(static_cast<int>(theta[0])));
      for (Eigen::Index i = 0; i < M; ++i) d.rows(i, 0) = mu + sd * latent.array(i, 0);
      break;
    }
    case ModelId::ricker: {
      const double log_r = theta[0], sd = std::sqrt(theta[1]), phi = theta[2];
      const Eigen::Index T = static_cast<Eigen::Index>(spec.ricker_T);
      for (Eigen::Index i = 0; i < M; ++i) {
        double logN = std::log(spec.ricker_N0);
        for (Eigen::Index t = 0; t < T; ++t) {
          logN = log_r + logN - std::exp(logN) + sd * latent.array(i, T + t);
          const double lambda = phi * std::exp(logN);
          d.rows(i, t) = static_cast<double>(poisson_inverse_cdf(latent.array(i, t), lambda));
        }
      }
      break;
    }
    case ModelId::lotka_volterra: {
      const std::size_t T = spec.lv_T();
      std::vector<double> xs(T), ys(T);
      for (Eigen::Index i = 0; i < M; ++i) {
        RngStream rng = detail::observation_stream(latent, static_cast<std::size_t>(i));
        lv_path(spec, theta.values, rng, xs.data(), ys.data(), [](const LvEvent&) {});
        for (std::size_t t = 0; t < T; ++t) {
          d.rows(i, static_cast<Eigen::Index>(t)) = xs[t];
          d.rows(i, static_cast<Eigen::Index>(T + t)) = ys[t];
        }
      }
      break;
    }
    case ModelId::cir: {
      const detail::CirTransition tr(theta[0], theta[1], theta[2], spec.cir_delta);
      const Eigen::Index T = static_cast<Eigen::Index>(spec.cir_T);
      for (Eigen::Index i = 0; i < M; ++i) {
        RngStream rng = detail::observation_stream(latent, static_cast<std::size_t>(i));
        double x = spec.cir_x0;
        for (Eigen::Index t = 0; t < T; ++t) {
          x = tr.c * noncentral_chi2(rng, tr.df, tr.noncentrality(x));
          d.rows(i, t) = x;
        }
      }
      break;
    }
  }
  return d;
}

inline LatentSource draw_latent(const ModelSpec& spec, std::size_t m, RngStream& stream) {
  if (m < 1) throw LatentError("draw_latent: m must be at least 1");
  LatentSource l;
  l.m = m;
  l.mode = spec.latent_mode();
  if (l.mode == LatentSource::Mode::seed) {
    const RngStream child = split_one(stream);
    l.seed = child.seed();
    l.stream_id = child.stream_id();
    return l;
  }
  const Eigen::Index M = static_cast<Eigen::Index>(m);
  const Eigen::Index W = static_cast<Eigen::Index>(spec.latent_width());
  l.array.resize(M, W);
  if (spec.id == ModelId::ricker) {
    const Eigen::Index T = static_cast<Eigen::Index>(spec.ricker_T);
    for (Eigen::Index i = 0; i < M; ++i) {
      for (Eigen::Index t = 0; t < T; ++t) l.array(i, t) = stream.uniform01();
      for (Eigen::Index t = 0; t < T; ++t) l.array(i, T + t) = std_normal(stream);
    }
  } else {
    for (Eigen::Index i = 0; i < M; ++i) l.array(i, 0) = std_normal(stream);
  }
  return l;
}

// log p(y | x) for the exact CIR transition over one step of length delta.
inline double cir_log_transition(double y, double x, double alpha, double beta, double sigma, double delta) {
  const detail::CirTransition tr(alpha, beta, sigma, delta);
  return log_ncx2_pdf(y / tr.c, tr.df, tr.noncentrality(x)) - std::log(tr.c);
}

// Log-density of one observation (row) under theta; throws when unavailable.
inline double oracle_row_log_density(const ModelSpec& spec, const ParamPoint& theta,
                                     const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  switch (spec.id) {
    case ModelId::normal_ls: return log_normal_pdf(row(0), theta[0], std::sqrt(theta[1]));
    case ModelId::gauss_choice:
      return log_normal_pdf(row(0), theta[1], std::sqrt(spec.gc_variance(static_cast<int>(theta[0]))));
    case ModelId::cir: {
      const detail::CirTransition tr(theta[0], theta[1], theta[2], spec.cir_delta);
      const double log_c = std::log(tr.c);
      double prev = spec.cir_x0, s = 0.0;
      for (Eigen::Index t = 0; t < row.size(); ++t) {
        const double y = row(t);
        if (!(y > 0.0)) throw DomainError("cir: nonpositive value in data");
        s += log_ncx2_pdf(y / tr.c, tr.df, tr.noncentrality(prev)) - log_c;
        prev = y;
      }
      return s;
    }
    default: throw UnavailableError(to_string(spec.id) + ": no closed-form density");
  }
}

// Exact log-likelihood, or nullopt where the model has none.
inline std::optional<double> oracle_log_lik(const ModelSpec& spec, const ParamPoint& theta, const Dataset& data) {
  if (!spec.has_oracle_density()) return std::nullopt;
  detail::check_theta(spec, theta);
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) s += oracle_row_log_density(spec, theta, data.rows.row(i));
  return s;
}

}  // namespace mhc

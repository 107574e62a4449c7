#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mhc/error.hpp"
#include "mhc/rand.hpp"
#include "mhc/special.hpp"

namespace mhc {

struct Prior {
  // nig: mu | sigma2 ~ N(mu0, sigma2 / nu), sigma2 ~ InvGamma(alpha, beta).
  // gauss_choice: model uniform on {1, 2}, mu ~ N(0, mu_sd^2).
  enum class Kind { uniform_box, cir_improper, flat, nig, gauss_choice };
  Kind kind = Kind::flat;
  std::vector<double> lo, hi;  // uniform_box bounds, closed
  double nig_mu0 = 0.0, nig_nu = 1.0, nig_alpha = 2.0, nig_beta = 1.0;
  double gc_mu_sd = 1.0;

  static Prior uniform_box(std::vector<double> lo, std::vector<double> hi) {
    Prior p;
    p.kind = Kind::uniform_box;
    p.lo = std::move(lo);
    p.hi = std::move(hi);
    return p;
  }
  static Prior lv_box() { return uniform_box({0, 0, 0, 0}, {0.1, 1.0, 2.0, 0.1}); }
  static Prior cir() {
    Prior p;
    p.kind = Kind::cir_improper;
    return p;
  }
  static Prior flat_prior() { return Prior{}; }
  static Prior nig(double mu0, double nu, double alpha, double beta) {
    Prior p;
    p.kind = Kind::nig;
    p.nig_mu0 = mu0;
    p.nig_nu = nu;
    p.nig_alpha = alpha;
    p.nig_beta = beta;
    return p;
  }
  static Prior gauss_choice(double mu_sd = 1.0) {
    Prior p;
    p.kind = Kind::gauss_choice;
    p.gc_mu_sd = mu_sd;
    return p;
  }

  bool proper() const { return kind == Kind::uniform_box || kind == Kind::nig || kind == Kind::gauss_choice; }

  // Log-density up to a constant; kNegInf off the support.
  double log_density(const std::vector<double>& th) const {
    for (double v : th)
      if (!std::isfinite(v)) return kNegInf;
    switch (kind) {
      case Kind::uniform_box:
        if (th.size() != lo.size()) throw ContractViolation("prior: dimension mismatch");
        for (std::size_t j = 0; j < th.size(); ++j)
          if (th[j] < lo[j] || th[j] > hi[j]) return kNegInf;
        return 0.0;
      case Kind::cir_improper:
        if (!(th[0] > 0 && th[0] < 1 && th[1] > 0 && th[2] > 0)) return kNegInf;
        return -std::log(th[2]);
      case Kind::flat:
        // Ricker: sigma2 > 0, phi >= 0.
        if (th.size() == 3 && (!(th[1] > 0) || th[2] < 0)) return kNegInf;
        return 0.0;
      case Kind::nig: {
        const double mu = th[0], s2 = th[1];
        if (!(s2 > 0)) return kNegInf;
        return log_normal_pdf(mu, nig_mu0, std::sqrt(s2 / nig_nu)) + nig_alpha * std::log(nig_beta) -
               std::lgamma(nig_alpha) - (nig_alpha + 1) * std::log(s2) - nig_beta / s2;
      }
      case Kind::gauss_choice:
        if (th[0] != 1.0 && th[0] != 2.0) return kNegInf;
        return std::log(0.5) + log_normal_pdf(th[1], 0.0, gc_mu_sd);
    }
    return kNegInf;
  }

  std::vector<double> draw(RngStream& s) const {
    switch (kind) {
      case Kind::uniform_box: {
        std::vector<double> th(lo.size());
        for (std::size_t j = 0; j < th.size(); ++j) th[j] = lo[j] + (hi[j] - lo[j]) * s.uniform01();
        return th;
      }
      case Kind::nig: {
        const double s2 = 1.0 / (std_gamma(s, nig_alpha) / nig_beta);
        return {nig_mu0 + std::sqrt(s2 / nig_nu) * std_normal(s), s2};
      }
      case Kind::gauss_choice: {
        const double m = s.uniform01() < 0.5 ? 1.0 : 2.0;
        return {m, gc_mu_sd * std_normal(s)};
      }
      default: throw UnsupportedError("prior: cannot draw from an improper prior");
    }
  }
};

inline std::string to_string(Prior::Kind k) {
  switch (k) {
    case Prior::Kind::uniform_box: return "uniform_box";
    case Prior::Kind::cir_improper: return "cir_improper";
    case Prior::Kind::flat: return "flat";
    case Prior::Kind::nig: return "nig";
    case Prior::Kind::gauss_choice: return "gauss_choice";
  }
  return "?";
}

inline Prior::Kind prior_kind_from_string(const std::string& s) {
  for (auto k : {Prior::Kind::uniform_box, Prior::Kind::cir_improper, Prior::Kind::flat, Prior::Kind::nig,
                 Prior::Kind::gauss_choice})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown prior kind: " + s);
}

}  // namespace mhc

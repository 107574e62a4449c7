#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

#include <boost/math/special_functions/gamma.hpp>

#include "mhc/error.hpp"

namespace mhc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

inline double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double log_sum_exp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  if (mx == kPosInf) return kPosInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// log I_nu(z), modified Bessel function of the first kind, nu > -1, z >= 0.
// Sums the power series outward from its largest term so nothing overflows.
inline double log_bessel_i(double nu, double z) {
  if (!(nu > -1.0) || !(z >= 0.0) || !std::isfinite(z)) throw DomainError("log_bessel_i: bad arguments");
  if (z == 0.0) return nu == 0.0 ? 0.0 : kNegInf;
  const double q = 0.25 * z * z;
  const double k0 = std::max(0.0, std::floor(0.5 * (-nu + std::sqrt(nu * nu + z * z))));
  const double log_peak = (2.0 * k0 + nu) * std::log(0.5 * z) - std::lgamma(k0 + 1.0) - std::lgamma(k0 + nu + 1.0);
  double sum = 1.0;
  double t = 1.0;
  for (double j = k0 + 1.0;; j += 1.0) {
    t *= q / (j * (j + nu));
    sum += t;
    if (t < 1e-17 * sum) break;
  }
  t = 1.0;
  for (double j = k0; j >= 1.0; j -= 1.0) {
    t *= j * (j + nu) / q;
    sum += t;
    if (t < 1e-17 * sum) break;
  }
  return log_peak + std::log(sum);
}

inline double log_chi2_pdf(double x, double df) {
  if (!(x > 0.0)) return kNegInf;
  const double h = 0.5 * df;
  return (h - 1.0) * std::log(x) - 0.5 * x - h * std::numbers::ln2 - std::lgamma(h);
}

// Noncentral chi-squared log-density, Bessel form.
inline double log_ncx2_pdf(double x, double df, double nc) {
  if (!(df > 0.0) || !(nc >= 0.0)) throw DomainError("log_ncx2_pdf: df must be > 0 and nc >= 0");
  if (!(x > 0.0)) return kNegInf;
  if (nc == 0.0) return log_chi2_pdf(x, df);
  return -std::numbers::ln2 - 0.5 * (x + nc) + (0.25 * df - 0.5) * std::log(x / nc) +
         log_bessel_i(0.5 * df - 1.0, std::sqrt(nc * x));
}

inline double log_poisson_pmf(double k, double lambda) {
  if (lambda == 0.0) return k == 0.0 ? 0.0 : kNegInf;
  return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

// Smallest k with P(X <= k) >= u for X ~ Poisson(lambda).
inline std::int64_t poisson_inverse_cdf(double u, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("poisson_inverse_cdf: lambda must be >= 0");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("poisson_inverse_cdf: u must lie in (0,1)");
  if (lambda == 0.0) return 0;
  if (lambda < 30.0) {
    double p = std::exp(-lambda);
    double F = p;
    std::int64_t k = 0;
    while (u > F) {
      ++k;
      p *= lambda / static_cast<double>(k);
      F += p;
      if (p == 0.0 && F < u) break;  // roundoff tail
    }
    return k;
  }
  // Start at the mode and walk; P(X <= k) = Q(k + 1, lambda).
  double k = std::floor(lambda);
  double F = boost::math::gamma_q(k + 1.0, lambda);
  double pmf = std::exp(log_poisson_pmf(k, lambda));
  if (u <= F) {
    while (k > 0.0 && u <= F - pmf) {
      F -= pmf;
      pmf *= k / lambda;
      k -= 1.0;
    }
  } else {
    while (u > F) {
      k += 1.0;
      pmf *= lambda / k;
      F += pmf;
      if (pmf == 0.0) break;
    }
  }
  return static_cast<std::int64_t>(k);
}

}  // namespace mhc

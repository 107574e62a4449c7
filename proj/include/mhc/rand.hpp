#pragma once

// Counter-based random streams and the distributions the simulators need.
//
// Generator: Philox4x32-10. The 64-bit seed is the Philox key; the 128-bit
// counter is (block index, stream id). Two streams with the same seed and
// different ids therefore walk disjoint counter ranges, each with 2^64
// blocks of 128 bits.
//
// split(s, n) draws one 64-bit nonce from s and gives child i the id
// mix(s.id, nonce, i) under the same seed. The parent stays usable and has
// been advanced past the nonce, so later splits of it yield new children.
// Children collide only if two mixed ids collide (a 64-bit hash event).
//
// All variate generators below are written out here rather than taken from
// <random>, whose distributions are implementation-defined.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mhc/error.hpp"

namespace mhc {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_ids(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(a ^ splitmix64(b ^ splitmix64(c + 0x632BE59BD9B4E019ULL)));
}

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace detail

using Philox4x32 = std::array<std::uint32_t, 4>;

// Ten-round Philox4x32 block function.
inline Philox4x32 philox4x32_10(Philox4x32 ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo32(kM0, ctr[0], hi0, lo0);
    detail::mulhilo32(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  // Number of 64-bit words consumed so far.
  std::uint64_t position() const { return block_ * 2 - static_cast<std::uint64_t>(have_); }

  std::uint64_t next_u64() {
    if (have_ == 0) refill();
    const std::uint64_t out = buf_[2 - have_];
    --have_;
    return out;
  }

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.seed_ == b.seed_ && a.stream_id_ == b.stream_id_ && a.block_ == b.block_ &&
           a.have_ == b.have_;
  }

 private:
  void refill() {
    const Philox4x32 ctr = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                            static_cast<std::uint32_t>(stream_id_),
                            static_cast<std::uint32_t>(stream_id_ >> 32)};
    const Philox4x32 r =
        philox4x32_10(ctr, {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    buf_[0] = (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
    buf_[1] = (static_cast<std::uint64_t>(r[3]) << 32) | r[2];
    ++block_;
    have_ = 2;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::uint64_t buf_[2] = {0, 0};
  int have_ = 0;
};

inline RngStream make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return RngStream(seed, stream_id);
}

inline std::vector<RngStream> split(RngStream& parent, std::size_t n) {
  if (n == 0) throw EmptySplitError("split: n must be at least 1");
  const std::uint64_t nonce = parent.next_u64();
  std::vector<RngStream> children;
  children.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    children.emplace_back(parent.seed(), detail::mix_ids(parent.stream_id(), nonce, i));
  return children;
}

inline RngStream split_one(RngStream& parent) { return split(parent, 1).front(); }

// ---------------------------------------------------------------------------
// Variate generators

// Standard normal quantile, Wichura's AS241 (PPND16), relative error ~1e-16.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
             4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
             2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
             1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
             1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
             2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
             7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return q < 0 ? -val : val;
}

// One uniform per normal (inversion), so array-mode latents are plain uniforms
// pushed through a fixed map.
inline double std_normal(RngStream& s) { return normal_quantile(s.uniform01()); }

inline double std_exponential(RngStream& s) { return -std::log(s.uniform01()); }

// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 via the U^(1/a) boost.
inline double std_gamma(RngStream& s, double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("gamma: shape must be positive");
  if (shape < 1.0) {
    const double g = std_gamma(s, shape + 1.0);
    return g * std::pow(s.uniform01(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = std_normal(s);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = s.uniform01();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Poisson: sequential inversion for lambda <= 10, Hormann's PTRS above.
inline std::int64_t poisson(RngStream& s, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("poisson: lambda must be >= 0");
  if (lambda == 0.0) return 0;
  if (lambda <= 10.0) {
    const double u = s.uniform01();
    double p = std::exp(-lambda);
    double F = p;
    std::int64_t k = 0;
    while (u > F && k < 1000) {
      ++k;
      p *= lambda / static_cast<double>(k);
      F += p;
    }
    return k;
  }
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double U = s.uniform01() - 0.5;
    const double V = s.uniform01();
    const double us = 0.5 - std::fabs(U);
    const double kd = std::floor((2.0 * a / us + b) * U + lambda + 0.43);
    if (us >= 0.07 && V <= vr) return static_cast<std::int64_t>(kd);
    if (kd < 0.0 || (us < 0.013 && V > us)) continue;
    if (std::log(V) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -lambda + kd * loglam - std::lgamma(kd + 1.0))
      return static_cast<std::int64_t>(kd);
  }
}

struct DistSpec {
  enum class Kind { uniform, normal, gamma, inverse_gamma, exponential, poisson, noncentral_chi2 };
  Kind kind = Kind::uniform;
  double a = 0.0;  // uniform lo, normal mu, shape, rate, lambda, df
  double b = 1.0;  // uniform hi, normal sigma, gamma rate, inverse-gamma scale, nc

  static DistSpec uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static DistSpec normal(double mu, double sigma) { return {Kind::normal, mu, sigma}; }
  static DistSpec gamma(double shape, double rate) { return {Kind::gamma, shape, rate}; }
  static DistSpec inverse_gamma(double shape, double scale) { return {Kind::inverse_gamma, shape, scale}; }
  static DistSpec exponential(double rate) { return {Kind::exponential, rate, 0.0}; }
  static DistSpec poisson(double lambda) { return {Kind::poisson, lambda, 0.0}; }
  static DistSpec noncentral_chi2(double df, double nc) { return {Kind::noncentral_chi2, df, nc}; }

  void validate() const {
    auto pos = [](double v) { return v > 0.0 && std::isfinite(v); };
    auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
    bool ok = true;
    switch (kind) {
      case Kind::uniform: ok = std::isfinite(a) && std::isfinite(b) && a < b; break;
      case Kind::normal: ok = std::isfinite(a) && pos(b); break;
      case Kind::gamma:
      case Kind::inverse_gamma: ok = pos(a) && pos(b); break;
      case Kind::exponential: ok = pos(a); break;
      case Kind::poisson: ok = nonneg(a); break;
      case Kind::noncentral_chi2: ok = pos(a) && nonneg(b); break;
    }
    if (!ok) throw DomainError("DistSpec: parameters outside domain");
  }
};

inline double noncentral_chi2(RngStream& s, double df, double nc) {
  const std::int64_t k = nc > 0.0 ? poisson(s, 0.5 * nc) : 0;
  return 2.0 * std_gamma(s, 0.5 * df + static_cast<double>(k));
}

// Draw without re-validating; callers validate once.
inline double draw_unchecked(RngStream& s, const DistSpec& d) {
  using K = DistSpec::Kind;
  switch (d.kind) {
    case K::uniform: return d.a + (d.b - d.a) * s.uniform01();
    case K::normal: return d.a + d.b * std_normal(s);
    case K::gamma: return std_gamma(s, d.a) / d.b;
    case K::inverse_gamma: return d.b / std_gamma(s, d.a);
    case K::exponential: return std_exponential(s) / d.a;
    case K::poisson: return static_cast<double>(poisson(s, d.a));
    case K::noncentral_chi2: return noncentral_chi2(s, d.a, d.b);
  }
  return 0.0;
}

inline double draw(RngStream& s, const DistSpec& d) {
  d.validate();
  return draw_unchecked(s, d);
}

inline std::vector<double> sample(RngStream& s, const DistSpec& d, std::size_t count) {
  d.validate();
  std::vector<double> out(count);
  for (auto& v : out) v = draw_unchecked(s, d);
  return out;
}

}  // namespace mhc

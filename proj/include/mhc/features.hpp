#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mhc/error.hpp"
#include "mhc/types.hpp"

namespace mhc {

struct FeatureSpec {
  enum class Kind { raw, poly2, summary, raw_plus_summary };
  Kind kind = Kind::raw;
  // Rows are series_count series of equal length laid end to end.
  std::size_t series_count = 1;
  bool mean = true;
  bool log_variance = true;
  std::vector<int> acf_lags = {1, 2};
  bool cross_correlation = false;
  std::size_t pca_components = 0;

  bool uses_summary() const { return kind == Kind::summary || kind == Kind::raw_plus_summary; }
  bool needs_pca() const { return uses_summary() && pca_components > 0; }
};

inline std::string to_string(FeatureSpec::Kind k) {
  switch (k) {
    case FeatureSpec::Kind::raw: return "raw";
    case FeatureSpec::Kind::poly2: return "poly2";
    case FeatureSpec::Kind::summary: return "summary";
    case FeatureSpec::Kind::raw_plus_summary: return "raw_plus_summary";
  }
  return "?";
}

inline FeatureSpec::Kind feature_kind_from_string(const std::string& s) {
  for (auto k : {FeatureSpec::Kind::raw, FeatureSpec::Kind::poly2, FeatureSpec::Kind::summary,
                 FeatureSpec::Kind::raw_plus_summary})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown feature kind: " + s);
}

struct PcaBasis {
  Vector center;     // p
  Matrix components;  // p x k, unit columns, largest-|entry| positive
};

inline constexpr double kVarianceFloor = 1e-12;

// Centered (unscaled) PCA of the rows of X, keeping the top k directions.
inline PcaBasis fit_pca(const Matrix& X, std::size_t k) {
  const Eigen::Index N = X.rows(), p = X.cols();
  const Eigen::Index K = static_cast<Eigen::Index>(k);
  if (N < 2) throw FeatureError("fit_pca: need at least two rows");
  if (K > p) throw FeatureError("fit_pca: more components than columns");
  PcaBasis b;
  b.center = X.colwise().mean().transpose();
  const Matrix C = X.rowwise() - b.center.transpose();
  b.components.resize(p, K);
  if (N < p) {
    // Gram trick: eigenvectors of C C' map to those of C' C.
    Eigen::SelfAdjointEigenSolver<Matrix> es(C * C.transpose());
    for (Eigen::Index j = 0; j < K; ++j) {
      const Eigen::Index idx = N - 1 - j;
      Vector v = C.transpose() * es.eigenvectors().col(idx);
      const double nrm = v.norm();
      if (nrm > 0) v /= nrm;
      b.components.col(j) = v;
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(C.transpose() * C);
    for (Eigen::Index j = 0; j < K; ++j) b.components.col(j) = es.eigenvectors().col(p - 1 - j);
  }
  for (Eigen::Index j = 0; j < K; ++j) {
    Eigen::Index imax;
    b.components.col(j).cwiseAbs().maxCoeff(&imax);
    if (b.components(imax, j) < 0) b.components.col(j) *= -1.0;
  }
  return b;
}

namespace detail {

inline double series_mean(const double* x, std::size_t T) {
  double s = 0.0;
  for (std::size_t t = 0; t < T; ++t) s += x[t];
  return s / static_cast<double>(T);
}

// Sample variance with the T-1 denominator.
inline double series_variance(const double* x, std::size_t T) {
  if (T < 2) return 0.0;
  const double m = series_mean(x, T);
  double s = 0.0;
  for (std::size_t t = 0; t < T; ++t) s += (x[t] - m) * (x[t] - m);
  return s / static_cast<double>(T - 1);
}

}  // namespace detail

// Lag-k autocorrelation; 0 for a constant series.
inline double autocorrelation(const double* x, std::size_t T, std::size_t lag) {
  const double m = detail::series_mean(x, T);
  double den = 0.0, num = 0.0;
  for (std::size_t t = 0; t < T; ++t) den += (x[t] - m) * (x[t] - m);
  if (den <= kVarianceFloor * static_cast<double>(T)) return 0.0;
  for (std::size_t t = 0; t + lag < T; ++t) num += (x[t] - m) * (x[t + lag] - m);
  return num / den;
}

// Lag-0 Pearson correlation; 0 if either series is constant.
inline double cross_correlation(const double* x, const double* y, std::size_t T) {
  const double mx = detail::series_mean(x, T), my = detail::series_mean(y, T);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    sxy += (x[t] - mx) * (y[t] - my);
    sxx += (x[t] - mx) * (x[t] - mx);
    syy += (y[t] - my) * (y[t] - my);
  }
  const double floor = kVarianceFloor * static_cast<double>(T);
  if (sxx <= floor || syy <= floor) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline double log_variance(const double* x, std::size_t T) {
  return std::log(std::max(detail::series_variance(x, T), kVarianceFloor));
}

// Summary statistics of one row: per series mean, log-variance, acf lags,
// then cross-correlations of series pairs.
inline std::vector<double> row_summaries(const double* row, std::size_t p, const FeatureSpec& spec) {
  if (spec.series_count == 0 || p % spec.series_count != 0)
    throw FeatureError("row width not divisible by series count");
  const std::size_t T = p / spec.series_count;
  std::vector<double> out;
  for (std::size_t s = 0; s < spec.series_count; ++s) {
    const double* x = row + s * T;
    if (spec.mean) out.push_back(detail::series_mean(x, T));
    if (spec.log_variance) out.push_back(log_variance(x, T));
    for (int lag : spec.acf_lags) out.push_back(autocorrelation(x, T, static_cast<std::size_t>(lag)));
  }
  if (spec.cross_correlation)
    for (std::size_t a = 0; a < spec.series_count; ++a)
      for (std::size_t b = a + 1; b < spec.series_count; ++b)
        out.push_back(cross_correlation(row + a * T, row + b * T, T));
  return out;
}

inline std::size_t summary_width(const FeatureSpec& spec) {
  const std::size_t s = spec.series_count;
  const std::size_t per = (spec.mean ? 1 : 0) + (spec.log_variance ? 1 : 0) + spec.acf_lags.size();
  return s * per + (spec.cross_correlation ? s * (s - 1) / 2 : 0);
}

inline std::size_t feature_width(const FeatureSpec& spec, std::size_t p) {
  switch (spec.kind) {
    case FeatureSpec::Kind::raw: return p;
    case FeatureSpec::Kind::poly2: return 2 * p;
    case FeatureSpec::Kind::summary: return summary_width(spec) + spec.pca_components;
    case FeatureSpec::Kind::raw_plus_summary: return p + summary_width(spec) + spec.pca_components;
  }
  return 0;
}

inline Matrix build_features(const Matrix& rows, const FeatureSpec& spec, const PcaBasis* basis = nullptr) {
  const Eigen::Index n = rows.rows(), p = rows.cols();
  if (n < 1) throw FeatureError("build_features: empty data");
  if (spec.needs_pca()) {
    if (!basis) throw FeatureError("build_features: PCA requested but no basis fitted");
    if (basis->center.size() != p || static_cast<std::size_t>(basis->components.cols()) != spec.pca_components)
      throw FeatureError("build_features: PCA basis does not match the data");
  }
  const Eigen::Index w = static_cast<Eigen::Index>(feature_width(spec, static_cast<std::size_t>(p)));
  Matrix F(n, w);
  switch (spec.kind) {
    case FeatureSpec::Kind::raw: F = rows; break;
    case FeatureSpec::Kind::poly2:
      F.leftCols(p) = rows;
      F.rightCols(p) = rows.array().square().matrix();
      break;
    case FeatureSpec::Kind::summary:
    case FeatureSpec::Kind::raw_plus_summary: {
      Eigen::Index off = 0;
      if (spec.kind == FeatureSpec::Kind::raw_plus_summary) {
        F.leftCols(p) = rows;
        off = p;
      }
      std::vector<double> buf(static_cast<std::size_t>(p));
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) buf[static_cast<std::size_t>(j)] = rows(i, j);
        const auto s = row_summaries(buf.data(), buf.size(), spec);
        for (std::size_t j = 0; j < s.size(); ++j) F(i, off + static_cast<Eigen::Index>(j)) = s[j];
      }
      off += static_cast<Eigen::Index>(summary_width(spec));
      if (spec.needs_pca())
        F.rightCols(static_cast<Eigen::Index>(spec.pca_components)) =
            (rows.rowwise() - basis->center.transpose()) * basis->components;
      break;
    }
  }
  return F;
}

inline Matrix build_features(const Dataset& data, const FeatureSpec& spec, const PcaBasis* basis = nullptr) {
  return build_features(data.rows, spec, basis);
}

// Features for a real/fake pair, refitting PCA on the pooled raw rows.
// The fitted basis is stored in basis_out when given.
inline std::pair<Matrix, Matrix> build_pair_features(const Matrix& real, const Matrix& fake, const FeatureSpec& spec,
                                                     std::optional<PcaBasis>* basis_out = nullptr) {
  if (real.cols() != fake.cols()) throw FeatureError("real and fake rows differ in width");
  std::optional<PcaBasis> basis;
  if (spec.needs_pca()) {
    Matrix pooled(real.rows() + fake.rows(), real.cols());
    pooled << real, fake;
    basis = fit_pca(pooled, spec.pca_components);
  }
  const PcaBasis* b = basis ? &*basis : nullptr;
  std::pair<Matrix, Matrix> out{build_features(real, spec, b), build_features(fake, spec, b)};
  if (basis_out) *basis_out = std::move(basis);
  return out;
}

}  // namespace mhc

#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhc/chain.hpp"
#include "mhc/classifier.hpp"
#include "mhc/diagnostics.hpp"
#include "mhc/error.hpp"
#include "mhc/samplers.hpp"
#include "mhc/types.hpp"

namespace mhc {

class IoError : public Error {
 public:
  using Error::Error;
};

// Shortest round-trip decimal; "inf", "-inf", "nan" for the rest.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return kPosInf;
  if (s == "-inf") return kNegInf;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw IoError("not a number: '" + s + "'");
  return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  return f;
}

}  // namespace detail

// Header plus numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw IoError("missing column: " + name);
  }
};

inline std::vector<std::string> read_csv_header(const std::string& path) {
  std::ifstream f = detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": empty file");
  return detail::split_csv_line(line);
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f = detail::open_in(path);
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": empty file");
  t.header = detail::split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size())
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) + " fields");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream f = detail::open_out(path);
  for (std::size_t j = 0; j < t.header.size(); ++j) f << (j ? "," : "") << t.header[j];
  f << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) f << (j ? "," : "") << format_double(r[j]);
    f << '\n';
  }
}

// iter, <params>, log_lik_est, log_prior, accepted
inline void write_chain_csv(const std::string& path, const Chain& c) {
  CsvTable t;
  t.header.push_back("iter");
  t.header.insert(t.header.end(), c.names.begin(), c.names.end());
  t.header.insert(t.header.end(), {"log_lik_est", "log_prior", "accepted"});
  for (std::size_t i = 0; i < c.length(); ++i) {
    std::vector<double> r{static_cast<double>(i + 1)};
    r.insert(r.end(), c.draws[i].begin(), c.draws[i].end());
    r.insert(r.end(), {c.log_lik_est[i], c.log_prior[i], static_cast<double>(c.accepted[i])});
    t.rows.push_back(std::move(r));
  }
  write_csv(path, t);
}

// The model indicator column ("model") is flagged discrete.
inline Chain read_chain_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t W = t.header.size();
  if (W < 5 || t.header[0] != "iter" || t.header[W - 3] != "log_lik_est" || t.header[W - 2] != "log_prior" ||
      t.header[W - 1] != "accepted")
    throw IoError(path + ": not a chain CSV");
  Chain c;
  c.names.assign(t.header.begin() + 1, t.header.end() - 3);
  for (const auto& n : c.names) c.discrete.push_back(n == "model");
  for (const auto& r : t.rows) c.push(std::vector<double>(r.begin() + 1, r.end() - 3), r[W - 3], r[W - 2], r[W - 1] != 0.0);
  return c;
}

inline void write_dataset_csv(const std::string& path, const Dataset& d) {
  CsvTable t;
  t.header = d.columns;
  if (t.header.size() != static_cast<std::size_t>(d.p()))
    for (Eigen::Index j = static_cast<Eigen::Index>(t.header.size()); j < d.p(); ++j)
      t.header.push_back("x_" + std::to_string(j + 1));
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(d.p()));
    for (Eigen::Index j = 0; j < d.p(); ++j) r[static_cast<std::size_t>(j)] = d.rows(i, j);
    t.rows.push_back(std::move(r));
  }
  write_csv(path, t);
}

inline Dataset read_dataset_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  Dataset d;
  d.columns = t.header;
  d.rows.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < t.header.size(); ++j)
      d.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.rows[i][j];
  return d;
}

// param, mean, l, u, ess, accept_rate; model-choice runs append
// bayes_factor, count_model1, count_model2.
inline void write_summary_csv(const std::string& path, const PosteriorSummary& s,
                              const std::optional<BayesFactor>& bf = std::nullopt) {
  std::ofstream f = detail::open_out(path);
  f << "param,mean,l,u,ess,accept_rate";
  if (bf) f << ",bayes_factor,count_model1,count_model2";
  f << '\n';
  for (const auto& c : s.coords) {
    f << c.name << ',' << format_double(c.mean) << ',' << format_double(c.l) << ',' << format_double(c.u) << ','
      << format_double(c.ess) << ',' << format_double(s.accept_rate);
    if (bf) f << ',' << format_double(bf->value) << ',' << bf->count1 << ',' << bf->count2;
    f << '\n';
  }
}

inline nlohmann::json to_json(const PosteriorSummary& s) {
  nlohmann::json j;
  j["burn_in"] = s.burn_in;
  j["draws"] = s.draws;
  j["level"] = s.level;
  j["accept_rate"] = s.accept_rate;
  for (const auto& c : s.coords)
    j["params"].push_back({{"param", c.name},
                           {"mean", c.mean},
                           {"l", c.l},
                           {"u", c.u},
                           {"ess", c.ess},
                           {"ess_degenerate", c.ess_degenerate}});
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f = detail::open_out(path);
  f << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream f = detail::open_in(path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

// rank, <params>, distance for the accepted set, closest first.
inline void write_abc_csv(const std::string& path, const AbcResult& r) {
  CsvTable t;
  t.header.push_back("rank");
  t.header.insert(t.header.end(), r.names.begin(), r.names.end());
  t.header.push_back("distance");
  for (std::size_t k = 0; k < r.accepted.size(); ++k) {
    std::vector<double> row{static_cast<double>(k + 1)};
    const auto& th = r.draws[r.accepted[k]];
    row.insert(row.end(), th.begin(), th.end());
    row.push_back(r.distances[r.accepted[k]]);
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

// Accepted ABC draws as a chain (for summaries); log_lik_est holds minus
// the distance.
inline Chain abc_as_chain(const AbcResult& r, const std::vector<bool>& discrete) {
  Chain c;
  c.algorithm = "abc";
  c.names = r.names;
  c.discrete = discrete;
  for (std::size_t i : r.accepted) c.push(r.draws[i], -r.distances[i], 0.0, true);
  return c;
}

// Discriminator blobs. Format version 1; fields mirror the structs.
inline constexpr int kDiscriminatorFormat = 1;

namespace detail {

inline nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json mat_json(const Matrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  j["data"] = data;
  return j;
}

inline Matrix json_mat(const nlohmann::json& j) {
  const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != r * c) throw IoError("matrix blob has the wrong size");
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = data[static_cast<std::size_t>(i * c + k)];
  return m;
}

}  // namespace detail

inline nlohmann::json feature_spec_json(const FeatureSpec& f) {
  return {{"kind", to_string(f.kind)},
          {"series_count", f.series_count},
          {"mean", f.mean},
          {"log_variance", f.log_variance},
          {"acf_lags", f.acf_lags},
          {"cross_correlation", f.cross_correlation},
          {"pca_components", f.pca_components}};
}

inline FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
  FeatureSpec f;
  f.kind = feature_kind_from_string(j.at("kind").get<std::string>());
  f.series_count = j.at("series_count").get<std::size_t>();
  f.mean = j.at("mean").get<bool>();
  f.log_variance = j.at("log_variance").get<bool>();
  f.acf_lags = j.at("acf_lags").get<std::vector<int>>();
  f.cross_correlation = j.at("cross_correlation").get<bool>();
  f.pca_components = j.at("pca_components").get<std::size_t>();
  return f;
}

inline nlohmann::json to_json(const Discriminator& d) {
  nlohmann::json j;
  j["format"] = kDiscriminatorFormat;
  j["kind"] = to_string(d.kind);
  j["eps_clip"] = d.eps_clip;
  j["n_real"] = d.n_real;
  j["n_fake"] = d.n_fake;
  j["width"] = d.width;
  j["features"] = feature_spec_json(d.features);
  if (d.pca) j["pca"] = {{"center", detail::vec_json(d.pca->center)}, {"components", detail::mat_json(d.pca->components)}};
  switch (d.kind) {
    case ClassifierSpec::Kind::logistic_l1_cv: {
      const auto& m = std::get<LogisticModel>(d.model);
      j["model"] = {{"intercept", m.intercept}, {"coef", detail::vec_json(m.coef)}, {"lambda", m.lambda}};
      break;
    }
    case ClassifierSpec::Kind::random_forest: {
      nlohmann::json trees = nlohmann::json::array();
      for (const Tree& t : std::get<ForestModel>(d.model).trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.vote});
        trees.push_back(nodes);
      }
      j["model"] = {{"trees", trees}};
      break;
    }
    case ClassifierSpec::Kind::neural_net: {
      const auto& m = std::get<NeuralNetModel>(d.model);
      j["model"] = {{"W1", detail::mat_json(m.W1)},       {"b1", detail::vec_json(m.b1)},
                    {"w2", detail::vec_json(m.w2)},       {"b2", m.b2},
                    {"in_mean", detail::vec_json(m.in_mean)}, {"in_scale", detail::vec_json(m.in_scale)}};
      break;
    }
    case ClassifierSpec::Kind::oracle: {
      const auto& m = std::get<OracleModel>(d.model);
      j["model"] = {{"model", to_string(m.model.id)}, {"theta", m.theta.values}, {"theta0", m.theta0.values}};
      break;
    }
    case ClassifierSpec::Kind::constant: break;
  }
  return j;
}

// Oracle blobs are rebuilt from the default model constants.
inline Discriminator discriminator_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<int>() != kDiscriminatorFormat) throw IoError("discriminator: unknown format version");
    Discriminator d;
    d.kind = classifier_kind_from_string(j.at("kind").get<std::string>());
    d.eps_clip = j.at("eps_clip").get<double>();
    d.n_real = j.at("n_real").get<std::size_t>();
    d.n_fake = j.at("n_fake").get<std::size_t>();
    d.width = j.at("width").get<std::size_t>();
    d.features = feature_spec_from_json(j.at("features"));
    if (j.contains("pca"))
      d.pca = PcaBasis{detail::json_vec(j["pca"].at("center")), detail::json_mat(j["pca"].at("components"))};
    const auto& m = j.contains("model") ? j["model"] : nlohmann::json::object();
    switch (d.kind) {
      case ClassifierSpec::Kind::logistic_l1_cv:
        d.model = LogisticModel{m.at("intercept").get<double>(), detail::json_vec(m.at("coef")), m.at("lambda").get<double>()};
        break;
      case ClassifierSpec::Kind::random_forest: {
        ForestModel f;
        for (const auto& tj : m.at("trees")) {
          Tree t;
          for (const auto& nj : tj)
            t.nodes.push_back(TreeNode{nj.at(0).get<int>(), nj.at(1).get<double>(), nj.at(2).get<int>(),
                                       nj.at(3).get<int>(), nj.at(4).get<double>()});
          f.trees.push_back(std::move(t));
        }
        d.model = std::move(f);
        break;
      }
      case ClassifierSpec::Kind::neural_net: {
        NeuralNetModel nn;
        nn.W1 = detail::json_mat(m.at("W1"));
        nn.b1 = detail::json_vec(m.at("b1"));
        nn.w2 = detail::json_vec(m.at("w2"));
        nn.b2 = m.at("b2").get<double>();
        nn.in_mean = detail::json_vec(m.at("in_mean"));
        nn.in_scale = detail::json_vec(m.at("in_scale"));
        d.model = std::move(nn);
        break;
      }
      case ClassifierSpec::Kind::oracle: {
        const ModelSpec spec = ModelSpec::make(model_id_from_string(m.at("model").get<std::string>()));
        d.model = OracleModel{spec, spec.point(m.at("theta").get<std::vector<double>>()),
                              spec.point(m.at("theta0").get<std::vector<double>>())};
        break;
      }
      case ClassifierSpec::Kind::constant: break;
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("discriminator blob: ") + e.what());
  }
}

}  // namespace mhc

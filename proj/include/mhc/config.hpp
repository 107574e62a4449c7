#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "mhc/classifier.hpp"
#include "mhc/error.hpp"
#include "mhc/features.hpp"
#include "mhc/models.hpp"
#include "mhc/priors.hpp"
#include "mhc/samplers.hpp"

namespace mhc {

inline const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"normal_ls", "ricker", "lotka_volterra", "cir", "model_choice"};
  return ids;
}

inline const std::vector<std::string>& algorithm_ids() {
  static const std::vector<std::string> ids{"mhc_fixed", "mhc_random", "mhc_debias", "exact_mh",
                                            "mcwm",      "abc",        "two_sample"};
  return ids;
}

inline ModelId experiment_model(const std::string& experiment) {
  if (experiment == "model_choice") return ModelId::gauss_choice;
  return model_id_from_string(experiment);
}

struct AbcSettings {
  std::size_t draws = 10000;
  std::size_t accept = 100;
  std::size_t pilot = 200;
  // "mean": per-dataset mean of each row entry; "series": mean, log-variance,
  // lag-1/2 autocorrelation per series (+ cross-correlation for two series).
  std::string summary = "series";
};

struct InitSettings {
  bool from_abc = false;
  std::size_t abc_draws = 10000;
  std::size_t abc_accept = 100;
};

struct ExperimentConfig {
  std::string experiment = "normal_ls";
  std::string scale = "paper";
  std::uint64_t seed = 1;
  std::vector<std::string> algorithms;
  std::size_t replications = 1;

  ModelSpec model;
  std::size_t n = 100;
  std::vector<double> truth;
  std::uint64_t data_seed = 1;

  std::size_t iterations = 1000;
  std::optional<std::size_t> burn_in;  // default 10% of iterations
  std::size_t m = 0;
  std::size_t nrep = 1;
  std::vector<double> init;  // empty means truth

  Proposal proposal;
  std::vector<double> exact_scales;  // exact_mh proposal scales when set
  Prior prior;
  ClassifierSpec classifier;
  FeatureSpec features;
  McwmOptions mcwm;
  AbcSettings abc;
  InitSettings init_settings;

  std::size_t burn_in_or_default() const { return burn_in ? *burn_in : iterations / 10; }
  std::vector<double> initial_state() const { return init.empty() ? truth : init; }
};

// Defaults for an experiment at full ("paper") scale.
inline ExperimentConfig default_config(const std::string& experiment) {
  if (std::find(experiment_ids().begin(), experiment_ids().end(), experiment) == experiment_ids().end())
    throw ConfigError("experiment: unknown id '" + experiment + "'");
  ExperimentConfig c;
  c.experiment = experiment;
  c.model = ModelSpec::make(experiment_model(experiment));
  if (experiment == "normal_ls") {
    c.n = 5000;
    c.truth = {0.0, 1.0};
    c.iterations = 500;
    c.algorithms = {"mhc_fixed", "mhc_random", "mhc_debias", "exact_mh"};
    c.prior = Prior::nig(0.0, 1.0, 2.0, 1.0);
    c.proposal = Proposal::gaussian({0.02, 0.03});
    c.features.kind = FeatureSpec::Kind::poly2;
  } else if (experiment == "ricker") {
    c.n = 300;
    c.model.ricker_T = 20;
    c.truth = {3.8, 1.0, 10.0};
    c.iterations = 10000;
    c.nrep = 20;
    c.algorithms = {"mhc_random", "mcwm"};
    c.prior = Prior::flat_prior();
    c.proposal = Proposal::ricker_mixed(1.0 / 300.0);
    c.classifier.kind = ClassifierSpec::Kind::neural_net;
    c.features.kind = FeatureSpec::Kind::raw;
  } else if (experiment == "lotka_volterra") {
    c.n = 20;
    c.model.lv_horizon = 20.0;
    c.truth = {0.01, 0.5, 1.0, 0.01};
    c.iterations = 10000;
    c.burn_in = 1000;
    c.algorithms = {"mhc_random", "abc"};
    c.prior = Prior::lv_box();
    c.proposal = Proposal::log_gaussian({0.05, 0.05, 0.05, 0.05});
    c.classifier.kind = ClassifierSpec::Kind::random_forest;
    c.features.kind = FeatureSpec::Kind::raw;
    c.abc = {10000, 100, 200, "series"};
    c.init_settings = {true, 10000, 100};
  } else if (experiment == "cir") {
    c.n = 100;
    c.model.cir_T = 500;
    c.model.cir_delta = 1.0;
    c.truth = {0.07, 0.15, 0.07};
    c.iterations = 10000;
    c.algorithms = {"exact_mh", "mhc_fixed", "mhc_random", "mcwm"};
    c.prior = Prior::cir();
    c.proposal = Proposal::cir_blocked(0.01);
    c.exact_scales = {0.005, 0.005, 0.005};
    c.features.kind = FeatureSpec::Kind::raw_plus_summary;
    c.features.pca_components = 3;
    c.mcwm = {2, 4, 0};
  } else {
    c.n = 500;
    c.model.gc_n = 500;
    c.truth = {1.0, 0.0};
    c.iterations = 550;
    c.burn_in = 50;
    c.algorithms = {"exact_mh", "mhc_fixed", "abc"};
    c.prior = Prior::gauss_choice();
    c.proposal = Proposal::model_choice(0.1);
    c.features.kind = FeatureSpec::Kind::poly2;
    c.abc = {10000, 500, 200, "mean"};
  }
  c.features.series_count = c.model.series_count();
  if (c.model.id == ModelId::lotka_volterra) c.features.cross_correlation = true;
  return c;
}

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "experiment", "scale", "seed", "algorithms", "replications",
      "model.n", "model.T", "model.delta", "model.x0", "model.horizon", "model.dt", "model.cap", "model.truth",
      "model.data_seed", "model.N0",
      "sampler.iterations", "sampler.burn_in", "sampler.m", "sampler.nrep", "sampler.init",
      "proposal.kind", "proposal.scales", "proposal.exact_scales", "proposal.joint_prob", "proposal.flip_prob",
      "proposal.mixed_variance",
      "prior.kind", "prior.lo", "prior.hi", "prior.mu0", "prior.nu", "prior.alpha", "prior.beta", "prior.mu_sd",
      "classifier.kind", "classifier.eps_clip", "classifier.lambda", "classifier.n_lambda",
      "classifier.lambda_min_ratio", "classifier.folds", "classifier.standardize", "classifier.tol",
      "classifier.trees", "classifier.mtry", "classifier.min_leaf", "classifier.hidden", "classifier.epochs",
      "classifier.learning_rate", "classifier.momentum",
      "features.kind", "features.pca_components", "features.acf_lags", "features.mean", "features.log_variance",
      "features.cross_correlation",
      "mcwm.M", "mcwm.N", "mcwm.K",
      "abc.draws", "abc.accept", "abc.pilot", "abc.summary",
      "init.from_abc", "init.abc_draws", "init.abc_accept"};
  return keys;
}

inline void collect_keys(const toml::table& t, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [k, v] : t) {
    const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const toml::table* sub = v.as_table()) collect_keys(*sub, key, out);
    else out.push_back(key);
  }
}

class Reader {
 public:
  explicit Reader(const toml::table& t) : t_(t) {}

  const toml::node* node(const std::string& path) const { return t_.at_path(path).node(); }

  template <class F>
  void get(const std::string& path, F&& assign) {
    const toml::node* n = node(path);
    if (!n) return;
    try {
      assign(*n);
    } catch (const ConfigError& e) {
      errors.push_back(path + ": " + e.what());
    }
  }

  void num(const std::string& path, double& out) {
    get(path, [&](const toml::node& n) { out = as_double(n); });
  }
  void count(const std::string& path, std::size_t& out) {
    get(path, [&](const toml::node& n) { out = as_count(n); });
  }
  void u64(const std::string& path, std::uint64_t& out) {
    get(path, [&](const toml::node& n) { out = static_cast<std::uint64_t>(as_count(n)); });
  }
  void flag(const std::string& path, bool& out) {
    get(path, [&](const toml::node& n) {
      if (!n.is_boolean()) throw ConfigError("expected true or false");
      out = n.as_boolean()->get();
    });
  }
  void str(const std::string& path, std::string& out) {
    get(path, [&](const toml::node& n) {
      if (!n.is_string()) throw ConfigError("expected a string");
      out = n.as_string()->get();
    });
  }
  void nums(const std::string& path, std::vector<double>& out) {
    get(path, [&](const toml::node& n) {
      const toml::array* a = n.as_array();
      if (!a) throw ConfigError("expected an array of numbers");
      std::vector<double> v;
      for (const auto& e : *a) v.push_back(as_double(e));
      out = std::move(v);
    });
  }
  void strs(const std::string& path, std::vector<std::string>& out) {
    get(path, [&](const toml::node& n) {
      const toml::array* a = n.as_array();
      if (!a) throw ConfigError("expected an array of strings");
      std::vector<std::string> v;
      for (const auto& e : *a) {
        if (!e.is_string()) throw ConfigError("expected an array of strings");
        v.push_back(e.as_string()->get());
      }
      out = std::move(v);
    });
  }

  std::vector<std::string> errors;

 private:
  static double as_double(const toml::node& n) {
    if (n.is_floating_point()) return n.as_floating_point()->get();
    if (n.is_integer()) return static_cast<double>(n.as_integer()->get());
    throw ConfigError("expected a number");
  }
  static std::size_t as_count(const toml::node& n) {
    if (!n.is_integer() || n.as_integer()->get() < 0) throw ConfigError("expected a nonnegative integer");
    return static_cast<std::size_t>(n.as_integer()->get());
  }

  const toml::table& t_;
};

}  // namespace detail

// Applies "a.b=c" to the table. c is read as a TOML value when it parses as
// one, otherwise as a bare string.
inline void apply_override(toml::table& t, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected KEY=VALUE, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + value);
  } catch (const toml::parse_error&) {
    parsed = toml::table{{"v", value}};
  }
  toml::table* cur = &t;
  std::string rest = key;
  for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
    const std::string part = rest.substr(0, dot);
    rest = rest.substr(dot + 1);
    if (!cur->contains(part)) cur->insert(part, toml::table{});
    cur = (*cur)[part].as_table();
    if (!cur) throw ConfigError("--set: '" + part + "' in '" + key + "' is not a table");
  }
  cur->insert_or_assign(rest, *parsed["v"].node());
}

struct ParsedConfig {
  ExperimentConfig config;
  std::vector<std::string> errors;  // field-path prefixed
  bool built = false;               // false when the experiment id is unknown
};

// Builds a config from a TOML table: experiment defaults first, then every
// key present in the table.
inline ParsedConfig config_from_table(const toml::table& t) {
  ParsedConfig out;
  std::vector<std::string> keys;
  detail::collect_keys(t, "", keys);
  for (const auto& k : keys)
    if (!detail::known_keys().count(k)) out.errors.push_back(k + ": unknown key");

  detail::Reader r(t);
  std::string experiment = "normal_ls";
  r.str("experiment", experiment);
  try {
    out.config = default_config(experiment);
  } catch (const ConfigError& e) {
    out.errors.push_back(e.what());
    return out;
  }
  out.built = true;
  ExperimentConfig& c = out.config;
  r.str("scale", c.scale);
  r.u64("seed", c.seed);
  c.data_seed = c.seed;
  r.strs("algorithms", c.algorithms);
  r.count("replications", c.replications);

  r.count("model.n", c.n);
  if (c.model.id == ModelId::gauss_choice) c.model.gc_n = c.n;
  std::size_t T = 0;
  r.count("model.T", T);
  if (T) {
    if (c.model.id == ModelId::ricker) c.model.ricker_T = T;
    else if (c.model.id == ModelId::cir) c.model.cir_T = T;
    else r.errors.push_back("model.T: only ricker and cir have a series length");
  }
  r.num("model.delta", c.model.cir_delta);
  r.num("model.x0", c.model.cir_x0);
  r.num("model.N0", c.model.ricker_N0);
  r.num("model.horizon", c.model.lv_horizon);
  r.num("model.dt", c.model.lv_dt);
  r.num("model.cap", c.model.lv_cap);
  r.nums("model.truth", c.truth);
  r.u64("model.data_seed", c.data_seed);

  r.count("sampler.iterations", c.iterations);
  r.get("sampler.burn_in", [&](const toml::node& n) {
    if (!n.is_integer() || n.as_integer()->get() < 0) throw ConfigError("expected a nonnegative integer");
    c.burn_in = static_cast<std::size_t>(n.as_integer()->get());
  });
  r.count("sampler.m", c.m);
  r.count("sampler.nrep", c.nrep);
  r.nums("sampler.init", c.init);

  if (c.model.id == ModelId::ricker && !r.node("proposal.mixed_variance"))
    c.proposal.mixed_variance = 1.0 / static_cast<double>(std::max<std::size_t>(c.n, 1));
  r.get("proposal.kind", [&](const toml::node& n) {
    if (!n.is_string()) throw ConfigError("expected a string");
    c.proposal.kind = proposal_kind_from_string(n.as_string()->get());
  });
  r.nums("proposal.scales", c.proposal.scales);
  r.nums("proposal.exact_scales", c.exact_scales);
  r.num("proposal.joint_prob", c.proposal.joint_prob);
  r.num("proposal.flip_prob", c.proposal.flip_prob);
  r.num("proposal.mixed_variance", c.proposal.mixed_variance);

  r.get("prior.kind", [&](const toml::node& n) {
    if (!n.is_string()) throw ConfigError("expected a string");
    c.prior.kind = prior_kind_from_string(n.as_string()->get());
  });
  r.nums("prior.lo", c.prior.lo);
  r.nums("prior.hi", c.prior.hi);
  r.num("prior.mu0", c.prior.nig_mu0);
  r.num("prior.nu", c.prior.nig_nu);
  r.num("prior.alpha", c.prior.nig_alpha);
  r.num("prior.beta", c.prior.nig_beta);
  r.num("prior.mu_sd", c.prior.gc_mu_sd);

  r.get("classifier.kind", [&](const toml::node& n) {
    if (!n.is_string()) throw ConfigError("expected a string");
    c.classifier.kind = classifier_kind_from_string(n.as_string()->get());
  });
  r.num("classifier.eps_clip", c.classifier.eps_clip);
  r.get("classifier.lambda", [&](const toml::node& n) {
    double v = 0;
    if (n.is_floating_point()) v = n.as_floating_point()->get();
    else if (n.is_integer()) v = static_cast<double>(n.as_integer()->get());
    else throw ConfigError("expected a number");
    c.classifier.logistic.fixed_lambda = v;
  });
  r.count("classifier.n_lambda", c.classifier.logistic.n_lambda);
  r.num("classifier.lambda_min_ratio", c.classifier.logistic.lambda_min_ratio);
  r.count("classifier.folds", c.classifier.logistic.folds);
  r.flag("classifier.standardize", c.classifier.logistic.lasso.standardize);
  r.num("classifier.tol", c.classifier.logistic.lasso.tol);
  r.count("classifier.trees", c.classifier.forest.n_trees);
  r.count("classifier.mtry", c.classifier.forest.mtry);
  r.count("classifier.min_leaf", c.classifier.forest.min_leaf);
  r.count("classifier.hidden", c.classifier.net.hidden);
  r.count("classifier.epochs", c.classifier.net.epochs);
  r.num("classifier.learning_rate", c.classifier.net.learning_rate);
  r.num("classifier.momentum", c.classifier.net.momentum);

  r.get("features.kind", [&](const toml::node& n) {
    if (!n.is_string()) throw ConfigError("expected a string");
    c.features.kind = feature_kind_from_string(n.as_string()->get());
  });
  r.count("features.pca_components", c.features.pca_components);
  r.get("features.acf_lags", [&](const toml::node& n) {
    const toml::array* a = n.as_array();
    if (!a) throw ConfigError("expected an array of integers");
    std::vector<int> v;
    for (const auto& e : *a) {
      if (!e.is_integer() || e.as_integer()->get() < 1) throw ConfigError("lags must be positive integers");
      v.push_back(static_cast<int>(e.as_integer()->get()));
    }
    c.features.acf_lags = std::move(v);
  });
  r.flag("features.mean", c.features.mean);
  r.flag("features.log_variance", c.features.log_variance);
  r.flag("features.cross_correlation", c.features.cross_correlation);
  c.features.series_count = c.model.series_count();

  std::size_t M = static_cast<std::size_t>(c.mcwm.M), N = static_cast<std::size_t>(c.mcwm.N),
              K = static_cast<std::size_t>(c.mcwm.K);
  r.count("mcwm.M", M);
  r.count("mcwm.N", N);
  r.count("mcwm.K", K);
  c.mcwm = {static_cast<int>(M), static_cast<int>(N), static_cast<int>(K)};

  r.count("abc.draws", c.abc.draws);
  r.count("abc.accept", c.abc.accept);
  r.count("abc.pilot", c.abc.pilot);
  r.str("abc.summary", c.abc.summary);
  r.flag("init.from_abc", c.init_settings.from_abc);
  r.count("init.abc_draws", c.init_settings.abc_draws);
  r.count("init.abc_accept", c.init_settings.abc_accept);

  out.errors.insert(out.errors.end(), r.errors.begin(), r.errors.end());
  return out;
}

inline toml::table load_toml(const std::string& path) {
  try {
    return toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
}

// Cross-field checks. Each message starts with the offending field path.
inline std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> e;
  const ModelSpec& model = c.model;
  const std::size_t d = model.dim();
  const auto has = [&](const char* a) {
    return std::find(c.algorithms.begin(), c.algorithms.end(), a) != c.algorithms.end();
  };
  try {
    model.validate();
  } catch (const ConfigError& x) {
    e.push_back(std::string("model: ") + x.what());
  }
  if (c.scale != "paper" && c.scale != "desk") e.push_back("scale: must be paper or desk");
  if (c.algorithms.empty()) e.push_back("algorithms: at least one algorithm is required");
  for (const auto& a : c.algorithms)
    if (std::find(algorithm_ids().begin(), algorithm_ids().end(), a) == algorithm_ids().end())
      e.push_back("algorithms: unknown algorithm '" + a + "'");
  if (c.replications < 1) e.push_back("replications: must be at least 1");
  if (c.n < 1) e.push_back("model.n: must be at least 1");

  if (c.truth.size() != d) {
    e.push_back("model.truth: expected " + std::to_string(d) + " values");
  } else if (!model.point(c.truth).in_support()) {
    e.push_back("model.truth: outside the parameter support");
  }
  if (!c.init.empty() && c.init.size() != d) e.push_back("sampler.init: expected " + std::to_string(d) + " values");
  if (c.iterations < 1) e.push_back("sampler.iterations: must be at least 1");
  if (c.burn_in_or_default() >= c.iterations) e.push_back("sampler.burn_in: must be smaller than sampler.iterations");
  if (c.nrep < 1) e.push_back("sampler.nrep: must be at least 1");

  try {
    c.proposal.validate(d);
  } catch (const Error& x) {
    e.push_back(std::string("proposal: ") + x.what());
  }
  if (!c.exact_scales.empty() && c.exact_scales.size() != c.proposal.scales.size())
    e.push_back("proposal.exact_scales: must match proposal.scales in length");

  if (c.prior.kind == Prior::Kind::uniform_box) {
    if (c.prior.lo.size() != d || c.prior.hi.size() != d) e.push_back("prior.lo: box bounds need " + std::to_string(d) + " values each");
    else
      for (std::size_t j = 0; j < d; ++j)
        if (!(c.prior.lo[j] < c.prior.hi[j])) e.push_back("prior.hi: upper bound must exceed lower bound");
  }
  if (c.prior.kind == Prior::Kind::nig && (model.id != ModelId::normal_ls || !(c.prior.nig_nu > 0) ||
                                           !(c.prior.nig_alpha > 0) || !(c.prior.nig_beta > 0)))
    e.push_back("prior.kind: nig needs normal_ls and positive nu, alpha, beta");
  if (c.prior.kind == Prior::Kind::gauss_choice && model.id != ModelId::gauss_choice)
    e.push_back("prior.kind: gauss_choice prior needs the model_choice experiment");
  if (c.prior.kind == Prior::Kind::cir_improper && model.id != ModelId::cir)
    e.push_back("prior.kind: cir_improper needs the cir experiment");
  if (c.truth.size() == d && c.prior.log_density(c.truth) == kNegInf)
    e.push_back("model.truth: outside the prior support");
  if (c.init.size() == d && c.prior.log_density(c.init) == kNegInf)
    e.push_back("sampler.init: outside the prior support");

  try {
    c.classifier.validate();
  } catch (const ConfigError& x) {
    e.push_back(std::string("classifier: ") + x.what());
  }
  if (c.classifier.kind == ClassifierSpec::Kind::oracle && !model.has_oracle_density())
    e.push_back("classifier.kind: oracle needs a closed-form density");
  if (c.classifier.kind == ClassifierSpec::Kind::oracle && has("two_sample"))
    e.push_back("algorithms: two_sample has no oracle discriminator");
  if (c.features.kind == FeatureSpec::Kind::poly2 && model.row_width() != 1)
    e.push_back("features.kind: poly2 needs scalar observations");
  if (c.features.uses_summary() && model.row_width() / c.features.series_count < 3)
    e.push_back("features.kind: summaries need series of length >= 3");
  if (c.features.needs_pca() && c.features.pca_components > std::min(c.n, model.row_width()))
    e.push_back("features.pca_components: more components than rows or columns");

  if (has("mcwm")) {
    if (model.id != ModelId::cir && model.id != ModelId::ricker)
      e.push_back("algorithms: mcwm: " + to_string(model.id) + ": no conditional-latent structure");
    if (model.id == ModelId::cir && (c.mcwm.M < 2 || c.mcwm.N < 1)) e.push_back("mcwm.M: need M >= 2 and N >= 1");
  }
  if (has("exact_mh") && !model.has_oracle_density())
    e.push_back("algorithms: exact_mh: " + to_string(model.id) + " has no closed-form likelihood");
  if ((has("abc") || c.init_settings.from_abc) && !c.prior.proper())
    e.push_back(std::string(has("abc") ? "algorithms" : "init.from_abc") + ": abc requires proper prior");
  if (has("abc") && (c.abc.accept < 1 || c.abc.accept > c.abc.draws)) e.push_back("abc.accept: need 1 <= accept <= draws");
  if (c.init_settings.from_abc && (c.init_settings.abc_accept < 1 || c.init_settings.abc_accept > c.init_settings.abc_draws))
    e.push_back("init.abc_accept: need 1 <= abc_accept <= abc_draws");
  if (c.abc.summary != "mean" && c.abc.summary != "series") e.push_back("abc.summary: must be mean or series");
  if (c.abc.summary == "series" && model.row_width() / model.series_count() < 3 && (has("abc") || c.init_settings.from_abc))
    e.push_back("abc.summary: series summaries need series of length >= 3");
  if (has("mhc_debias")) {
    for (bool disc : model.discrete())
      if (disc) e.push_back("algorithms: mhc_debias: discrete parameters cannot be debiased");
  }
  return e;
}

// Load, apply overrides, parse and validate in one go; throws ConfigError
// listing every problem.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  toml::table t = load_toml(path);
  for (const auto& o : overrides) apply_override(t, o);
  ParsedConfig p = config_from_table(t);
  if (p.built) {
    const auto v = validate(p.config);
    p.errors.insert(p.errors.end(), v.begin(), v.end());
  }
  if (!p.errors.empty()) {
    std::string msg = path + ": invalid config";
    for (const auto& x : p.errors) msg += "\n  " + x;
    throw ConfigError(msg);
  }
  return p.config;
}

}  // namespace mhc

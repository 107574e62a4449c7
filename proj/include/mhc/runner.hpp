#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "mhc/config.hpp"
#include "mhc/diagnostics.hpp"
#include "mhc/io.hpp"
#include "mhc/likelihood.hpp"
#include "mhc/samplers.hpp"

namespace mhc {

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream f = detail::open_in(path);
  std::ostringstream os;
  os << f.rdbuf();
  return sha256_hex(os.str());
}

// Per-algorithm stream ids; fixed by name so that reordering the algorithm
// list leaves every chain unchanged.
inline std::uint64_t algorithm_stream(const std::string& alg) {
  const auto& ids = algorithm_ids();
  const auto it = std::find(ids.begin(), ids.end(), alg);
  if (it == ids.end()) throw ConfigError("unknown algorithm: " + alg);
  return static_cast<std::uint64_t>(it - ids.begin()) + 1;
}

inline std::uint64_t chain_stream_id(const std::string& alg, std::size_t rep) {
  return algorithm_stream(alg) + 16 * static_cast<std::uint64_t>(rep);
}

inline constexpr std::uint64_t kDataStreamBase = std::uint64_t{1} << 32;
inline constexpr std::uint64_t kInitStreamBase = std::uint64_t{2} << 32;
inline constexpr std::uint64_t kSliceStream = std::uint64_t{3} << 32;

// Observed data for one replication.
inline Dataset make_dataset(const ExperimentConfig& c, std::size_t rep) {
  RngStream s(c.data_seed, kDataStreamBase + rep);
  const LatentSource l = draw_latent(c.model, c.n, s);
  return simulate(c.model, c.model.point(c.truth), l, c.n);
}

inline ClassifierSpec effective_classifier(const ExperimentConfig& c) {
  ClassifierSpec cs = c.classifier;
  if (cs.kind == ClassifierSpec::Kind::oracle) cs.oracle_theta0 = c.truth;
  return cs;
}

inline Summarizer abc_summarizer(const ExperimentConfig& c) {
  if (c.abc.summary == "mean")
    return [](const Dataset& d) {
      std::vector<double> out(static_cast<std::size_t>(d.p()));
      for (Eigen::Index j = 0; j < d.p(); ++j) out[static_cast<std::size_t>(j)] = d.rows.col(j).mean();
      return out;
    };
  FeatureSpec fs;
  fs.kind = FeatureSpec::Kind::summary;
  fs.series_count = c.model.series_count();
  fs.cross_correlation = fs.series_count == 2;
  return [fs](const Dataset& d) { return summary_stats(d, fs); };
}

inline AbcResult run_abc_for(const ExperimentConfig& c, const Dataset& real, std::size_t M, std::size_t r,
                             RngStream& stream) {
  const ModelSpec& model = c.model;
  const std::size_t n = static_cast<std::size_t>(real.n());
  const Simulator sim = [&](const std::vector<double>& th, RngStream& s) {
    const LatentSource l = draw_latent(model, n, s);
    return simulate(model, model.point(th), l, n);
  };
  AbcResult res = run_abc(sim, abc_summarizer(c), c.prior, real, M, r, stream, c.abc.pilot);
  res.names = model.param_names();
  return res;
}

// Starting state of every chain in a replication.
inline std::vector<double> chain_init(const ExperimentConfig& c, const Dataset& real, std::size_t rep) {
  if (!c.init_settings.from_abc) return c.initial_state();
  RngStream s(c.seed, kInitStreamBase + rep);
  const AbcResult a = run_abc_for(c, real, c.init_settings.abc_draws, c.init_settings.abc_accept, s);
  std::vector<double> mean(c.model.dim(), 0.0);
  for (const auto& th : a.accepted_draws())
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += th[j];
  for (auto& v : mean) v /= static_cast<double>(a.accepted.size());
  // A box-prior mean can sit on the boundary of a log-scale support.
  for (std::size_t j = 0; j < mean.size(); ++j)
    if (c.proposal.kind == Proposal::Kind::log_gaussian_rw && !(mean[j] > 0.0)) mean[j] = c.truth[j];
  return mean;
}

inline SamplerConfig sampler_config(const ExperimentConfig& c, const std::string& alg, std::size_t rep,
                                    std::vector<double> init) {
  SamplerConfig s;
  s.T = c.iterations;
  s.m = c.m;
  s.nrep = c.nrep;
  s.init = std::move(init);
  s.seed = c.seed;
  s.stream_id = chain_stream_id(alg, rep);
  return s;
}

// One sampler run (abc included, as its accepted set).
inline Chain run_algorithm(const ExperimentConfig& c, const std::string& alg, const Dataset& real, std::size_t rep,
                           const std::vector<double>& init, std::vector<std::string>& warnings,
                           AbcResult* abc_out = nullptr) {
  SamplerConfig cfg = sampler_config(c, alg, rep, init);
  cfg.warn = [&warnings](const std::string& w) { warnings.push_back(w); };
  const ClassifierSpec cs = effective_classifier(c);
  if (alg == "mhc_fixed") return run_mhc(MhcMode::fixed, c.model, real, c.prior, c.proposal, cs, c.features, cfg);
  if (alg == "mhc_random") return run_mhc(MhcMode::random, c.model, real, c.prior, c.proposal, cs, c.features, cfg);
  if (alg == "two_sample")
    return run_mhc(MhcMode::two_sample, c.model, real, c.prior, c.proposal, cs, c.features, cfg);
  if (alg == "exact_mh") {
    Proposal p = c.proposal;
    if (!c.exact_scales.empty()) p.scales = c.exact_scales;
    return run_exact_mh(c.model, real, c.prior, p, cfg);
  }
  if (alg == "mcwm") return run_mcwm(c.model, real, c.prior, c.proposal, c.mcwm, cfg);
  if (alg == "abc") {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream s(cfg.seed, cfg.stream_id);
    AbcResult a = run_abc_for(c, real, c.abc.draws, c.abc.accept, s);
    Chain ch = abc_as_chain(a, c.model.discrete());
    ch.model = to_string(c.model.id);
    ch.seed = cfg.seed;
    ch.stream_id = cfg.stream_id;
    ch.init = init;
    ch.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (abc_out) *abc_out = std::move(a);
    return ch;
  }
  throw ConfigError("algorithms: cannot run '" + alg + "' directly");
}

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::string kind;
  bool volatile_content = false;  // metadata carries timestamps
};

struct RunManifest {
  std::string experiment;
  std::string scale;
  std::uint64_t seed = 0;
  bool complete = false;
  std::vector<Artifact> artifacts;
  std::vector<std::string> failures;
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["experiment"] = m.experiment;
  j["scale"] = m.scale;
  j["seed"] = m.seed;
  j["complete"] = m.complete;
  j["artifacts"] = nlohmann::json::array();
  for (const auto& a : m.artifacts)
    j["artifacts"].push_back({{"path", a.path}, {"sha256", a.sha256}, {"kind", a.kind}, {"volatile", a.volatile_content}});
  j["failures"] = m.failures;
  return j;
}

inline nlohmann::json proposal_json(const Proposal& p) {
  return {{"kind", to_string(p.kind)},
          {"scales", p.scales},
          {"joint_prob", p.joint_prob},
          {"flip_prob", p.flip_prob},
          {"mixed_variance", p.mixed_variance}};
}

inline nlohmann::json prior_json(const Prior& p) {
  nlohmann::json j{{"kind", to_string(p.kind)}, {"proper", p.proper()}};
  if (p.kind == Prior::Kind::uniform_box) {
    j["lo"] = p.lo;
    j["hi"] = p.hi;
  }
  if (p.kind == Prior::Kind::nig) j.update({{"mu0", p.nig_mu0}, {"nu", p.nig_nu}, {"alpha", p.nig_alpha}, {"beta", p.nig_beta}});
  if (p.kind == Prior::Kind::gauss_choice) j["mu_sd"] = p.gc_mu_sd;
  return j;
}

inline nlohmann::json classifier_json(const ClassifierSpec& c) {
  nlohmann::json j{{"kind", to_string(c.kind)}, {"eps_clip", c.eps_clip}};
  switch (c.kind) {
    case ClassifierSpec::Kind::logistic_l1_cv:
      j["n_lambda"] = c.logistic.n_lambda;
      j["lambda_min_ratio"] = c.logistic.lambda_min_ratio;
      j["folds"] = c.logistic.folds;
      j["standardize"] = c.logistic.lasso.standardize;
      if (c.logistic.fixed_lambda) j["lambda"] = *c.logistic.fixed_lambda;
      break;
    case ClassifierSpec::Kind::random_forest:
      j.update({{"trees", c.forest.n_trees}, {"mtry", c.forest.mtry}, {"min_leaf", c.forest.min_leaf}});
      break;
    case ClassifierSpec::Kind::neural_net:
      j.update({{"hidden", c.net.hidden},
                {"epochs", c.net.epochs},
                {"learning_rate", c.net.learning_rate},
                {"momentum", c.net.momentum}});
      break;
    case ClassifierSpec::Kind::oracle: j["theta0"] = c.oracle_theta0; break;
    case ClassifierSpec::Kind::constant: break;
  }
  return j;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json chain_metadata(const ExperimentConfig& c, const Chain& ch, std::size_t rep,
                                     const std::vector<std::string>& warnings) {
  const std::size_t burn = ch.algorithm == "abc" ? 0 : c.burn_in_or_default();
  nlohmann::json j;
  j["algorithm"] = ch.algorithm;
  j["model"] = ch.model;
  j["experiment"] = c.experiment;
  j["scale"] = c.scale;
  j["replication"] = rep;
  j["seed"] = ch.seed;
  j["stream_id"] = ch.stream_id;
  j["data_seed"] = c.data_seed;
  j["data_stream_id"] = kDataStreamBase + rep;
  j["n"] = c.n;
  j["m"] = c.m ? c.m : c.n;
  j["nrep"] = c.nrep;
  j["T"] = ch.length();
  j["burn_in"] = burn;
  j["init"] = ch.init;
  j["truth"] = c.truth;
  j["proposal"] = proposal_json(c.proposal);
  if (ch.algorithm == "exact_mh" && !c.exact_scales.empty()) j["proposal"]["scales"] = c.exact_scales;
  j["prior"] = prior_json(c.prior);
  j["classifier"] = classifier_json(effective_classifier(c));
  j["features"] = feature_spec_json(c.features);
  if (ch.algorithm == "mcwm") j["mcwm"] = {{"M", c.mcwm.M}, {"N", c.mcwm.N}, {"K", c.mcwm.K}};
  if (ch.algorithm == "abc")
    j["abc"] = {{"draws", c.abc.draws}, {"accept", c.abc.accept}, {"pilot", c.abc.pilot}, {"summary", c.abc.summary}};
  j["acceptance_rate"] = ch.acceptance_rate();
  j["failed_steps"] = ch.failed_steps;
  j["warnings"] = warnings;
  j["wall_clock_seconds"] = ch.wall_clock_seconds;
  j["finished_at"] = utc_timestamp();
  return j;
}

struct RunOptions {
  std::string out_dir;
  std::size_t jobs = 1;
  std::function<void(const std::string&)> log;
};

namespace detail {

inline std::string rep_suffix(const ExperimentConfig& c, std::size_t rep) {
  return c.replications > 1 ? "_rep" + std::to_string(rep + 1) : "";
}

class ArtifactSink {
 public:
  ArtifactSink(std::string dir, RunManifest& m) : dir_(std::move(dir)), m_(m) {}

  std::string path(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }

  void add(const std::string& name, const std::string& kind, bool volatile_content = false) {
    const std::string h = sha256_file(path(name));
    std::lock_guard<std::mutex> lk(mu_);
    m_.artifacts.push_back({name, h, kind, volatile_content});
  }

  void fail(const std::string& what) {
    std::lock_guard<std::mutex> lk(mu_);
    m_.failures.push_back(what);
  }

 private:
  std::string dir_;
  RunManifest& m_;
  std::mutex mu_;
};

// Runs f(i) for i < count on up to jobs threads.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& f) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

inline std::optional<BayesFactor> chain_bayes_factor(const Chain& ch, std::size_t burn) {
  for (std::size_t j = 0; j < ch.dim(); ++j)
    if (ch.names[j] == "model") {
      const auto v = ch.coordinate(j, burn);
      return bayes_factor(v);
    }
  return std::nullopt;
}

inline void write_chain_artifacts(const ExperimentConfig& c, const Chain& ch, std::size_t rep,
                                  const std::vector<std::string>& warnings, ArtifactSink& sink) {
  const std::string stem = ch.algorithm + rep_suffix(c, rep);
  const std::size_t burn = ch.algorithm == "abc" ? 0 : c.burn_in_or_default();
  write_chain_csv(sink.path(stem + ".chain.csv"), ch);
  sink.add(stem + ".chain.csv", "chain");
  write_summary_csv(sink.path(stem + ".summary.csv"), summarize(ch, burn), chain_bayes_factor(ch, burn));
  sink.add(stem + ".summary.csv", "summary");
  write_json(sink.path(stem + ".meta.json"), chain_metadata(c, ch, rep, warnings));
  sink.add(stem + ".meta.json", "metadata", true);
}

}  // namespace detail

// Runs every algorithm for every replication and writes the artifacts.
// Returns the manifest; complete is false when any task failed.
inline RunManifest run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
  const auto problems = validate(c);
  if (!problems.empty()) {
    std::string msg = "invalid config";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  std::filesystem::create_directories(opt.out_dir);
  RunManifest manifest;
  manifest.experiment = c.experiment;
  manifest.scale = c.scale;
  manifest.seed = c.seed;
  const std::string manifest_path = (std::filesystem::path(opt.out_dir) / "manifest.json").string();
  write_json(manifest_path, to_json(manifest));
  detail::ArtifactSink sink(opt.out_dir, manifest);
  const auto log = [&](const std::string& s) {
    if (opt.log) opt.log(s);
  };

  const auto listed = [&](const std::string& a) {
    return std::find(c.algorithms.begin(), c.algorithms.end(), a) != c.algorithms.end();
  };
  std::vector<std::string> base;
  for (const auto& a : algorithm_ids()) {
    if (a == "mhc_debias") continue;
    if (listed(a) || (listed("mhc_debias") && (a == "mhc_fixed" || a == "mhc_random"))) base.push_back(a);
  }

  // Data and initial states first, one task per replication.
  std::vector<Dataset> data(c.replications);
  std::vector<std::vector<double>> inits(c.replications);
  std::vector<char> rep_ok(c.replications, 1);
  detail::parallel_for(c.replications, opt.jobs, [&](std::size_t r) {
    try {
      data[r] = make_dataset(c, r);
      const std::string name = "data" + detail::rep_suffix(c, r) + ".csv";
      write_dataset_csv(sink.path(name), data[r]);
      sink.add(name, "data");
      inits[r] = chain_init(c, data[r], r);
    } catch (const std::exception& e) {
      rep_ok[r] = 0;
      sink.fail("replication " + std::to_string(r + 1) + ": " + e.what());
    }
  });

  struct Task {
    std::size_t rep;
    std::string alg;
  };
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < c.replications; ++r)
    if (rep_ok[r])
      for (const auto& a : base) tasks.push_back({r, a});
  std::vector<std::optional<Chain>> chains(tasks.size());
  detail::parallel_for(tasks.size(), opt.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    std::vector<std::string> warnings;
    try {
      AbcResult abc;
      Chain ch = run_algorithm(c, t.alg, data[t.rep], t.rep, inits[t.rep], warnings, &abc);
      if (listed(t.alg)) {
        detail::write_chain_artifacts(c, ch, t.rep, warnings, sink);
        if (t.alg == "abc") {
          const std::string name = "abc" + detail::rep_suffix(c, t.rep) + ".draws.csv";
          write_abc_csv(sink.path(name), abc);
          sink.add(name, "abc");
        }
      }
      log(t.alg + detail::rep_suffix(c, t.rep) + ": done, acceptance " + format_double(ch.acceptance_rate()));
      chains[i] = std::move(ch);
    } catch (const std::exception& e) {
      sink.fail(t.alg + detail::rep_suffix(c, t.rep) + ": " + e.what());
    }
  });

  if (listed("mhc_debias")) {
    for (std::size_t r = 0; r < c.replications; ++r) {
      const Chain *fixed = nullptr, *random = nullptr;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].rep != r || !chains[i]) continue;
        if (tasks[i].alg == "mhc_fixed") fixed = &*chains[i];
        if (tasks[i].alg == "mhc_random") random = &*chains[i];
      }
      if (!fixed || !random) {
        if (rep_ok[r]) sink.fail("mhc_debias" + detail::rep_suffix(c, r) + ": input chains missing");
        continue;
      }
      try {
        const std::size_t burn = c.burn_in_or_default();
        Chain d = debias(trim(*fixed, burn), trim(*random, burn));
        d.model = fixed->model;
        d.seed = c.seed;
        d.stream_id = chain_stream_id("mhc_debias", r);
        d.init = fixed->init;
        d.wall_clock_seconds = fixed->wall_clock_seconds + random->wall_clock_seconds;
        // Inputs are already trimmed; keep the output's own burn-in at zero.
        ExperimentConfig cd = c;
        cd.burn_in = 0;
        detail::write_chain_artifacts(cd, d, r, {}, sink);
      } catch (const std::exception& e) {
        sink.fail("mhc_debias" + detail::rep_suffix(c, r) + ": " + e.what());
      }
    }
  }

  std::sort(manifest.artifacts.begin(), manifest.artifacts.end(),
            [](const Artifact& a, const Artifact& b) { return a.path < b.path; });
  std::sort(manifest.failures.begin(), manifest.failures.end());
  manifest.complete = manifest.failures.empty();
  write_json(manifest_path, to_json(manifest));
  return manifest;
}

// Grid "a:b:steps" -> steps evenly spaced values from a to b.
inline std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : spec) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) throw ConfigError("grid: expected a:b:steps, got '" + spec + "'");
  double a = 0, b = 0;
  try {
    a = parse_double(parts[0]);
    b = parse_double(parts[1]);
  } catch (const IoError&) {
    throw ConfigError("grid: bad endpoint in '" + spec + "'");
  }
  std::size_t steps = 0;
  const auto res = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), steps);
  if (res.ec != std::errc{} || res.ptr != parts[2].data() + parts[2].size() || steps < 1)
    throw ConfigError("grid: bad step count in '" + spec + "'");
  if (!(std::isfinite(a) && std::isfinite(b))) throw ConfigError("grid: endpoints must be finite");
  std::vector<double> g;
  for (std::size_t k = 0; k < steps; ++k)
    g.push_back(steps == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(steps - 1));
  return g;
}

// Estimated log-likelihood ratio (and oracle log-likelihood when
// available) over a 1-D or 2-D grid, other coordinates at the truth. The
// latent sources and fit stream are fixed across the grid.
inline CsvTable likelihood_slice(const ExperimentConfig& c, const std::vector<std::string>& params,
                                 const std::vector<std::vector<double>>& grids, std::size_t rep = 0) {
  if (params.empty() || params.size() > 2 || params.size() != grids.size())
    throw ConfigError("slice: need one or two parameters with one grid each");
  const auto names = c.model.param_names();
  std::vector<std::size_t> idx;
  for (const auto& p : params) {
    const auto it = std::find(names.begin(), names.end(), p);
    if (it == names.end()) throw ConfigError("slice: unknown parameter '" + p + "'");
    idx.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  if (idx.size() == 2 && idx[0] == idx[1]) throw ConfigError("slice: parameters must differ");
  const Dataset real = make_dataset(c, rep);
  const ClassifierSpec cs = effective_classifier(c);
  RngStream root(c.seed, kSliceStream + rep);
  std::vector<RngStream> st = split(root, 2);
  const std::size_t m = c.m ? c.m : c.n;
  const std::vector<LatentSource> latents = detail::draw_latents(c.model, m, c.nrep, st[0]);
  const bool oracle = c.model.has_oracle_density();

  std::vector<std::vector<double>> points;
  if (idx.size() == 1) {
    for (double v : grids[0]) points.push_back({v});
  } else {
    for (double a : grids[0])
      for (double b : grids[1]) points.push_back({a, b});
  }
  for (const auto& pt : points) {
    std::vector<double> th = c.truth;
    for (std::size_t k = 0; k < idx.size(); ++k) th[idx[k]] = pt[k];
    if (!c.model.point(th).in_support()) throw SupportError("slice: grid point outside the parameter support");
  }

  CsvTable t;
  t.header = params;
  t.header.push_back("eta");
  if (oracle) t.header.push_back("oracle_log_lik");
  for (const auto& pt : points) {
    std::vector<double> th = c.truth;
    for (std::size_t k = 0; k < idx.size(); ++k) th[idx[k]] = pt[k];
    const ParamPoint p = c.model.point(th);
    std::vector<double> row = pt;
    row.push_back(estimate(c.model, p, real, latents, cs, c.features, st[1]).eta);
    if (oracle) row.push_back(*oracle_log_lik(c.model, p, real));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace mhc

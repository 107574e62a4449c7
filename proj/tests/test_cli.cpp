#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "mhc/config.hpp"
#include "mhc/io.hpp"
#include "mhc/runner.hpp"

using namespace mhc;
namespace fs = std::filesystem;

namespace {

std::string config_path(const std::string& name) { return std::string(MHC_SOURCE_DIR) + "/configs/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mhc_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> errors_for(const std::string& file, const std::vector<std::string>& overrides) {
  toml::table t = load_toml(config_path(file));
  for (const auto& o : overrides) apply_override(t, o);
  ParsedConfig p = config_from_table(t);
  if (p.built) {
    const auto v = validate(p.config);
    p.errors.insert(p.errors.end(), v.begin(), v.end());
  }
  return p.errors;
}

bool mentions(const std::vector<std::string>& errs, const std::string& needle) {
  for (const auto& e : errs)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

std::map<std::string, std::string> stable_hashes(const RunManifest& m) {
  std::map<std::string, std::string> out;
  for (const auto& a : m.artifacts)
    if (!a.volatile_content) out[a.path] = a.sha256;
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(MHC_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Io, DoubleRoundTrip) {
  for (double v : {0.1, -3.0, 1e-300, 123456.789, 0.07, kPosInf, kNegInf}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(kNegInf), "-inf");
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_TRUE(std::isnan(parse_double("nan")));
  EXPECT_THROW(parse_double("1.5x"), IoError);
}

TEST(Io, ChainCsvRoundTrip) {
  Chain c;
  c.names = {"model", "mu"};
  c.discrete = {true, false};
  c.push({1, 0.25}, -10.5, -1.0, true);
  c.push({1, 0.25}, kNegInf, -1.0, false);
  c.push({2, -0.1}, 3.0, kNegInf, true);
  const fs::path d = scratch("chain");
  fs::create_directories(d);
  write_chain_csv((d / "c.csv").string(), c);
  EXPECT_EQ(read_file(d / "c.csv").substr(0, 46), "iter,model,mu,log_lik_est,log_prior,accepted\n1");
  const Chain r = read_chain_csv((d / "c.csv").string());
  EXPECT_EQ(r.names, c.names);
  EXPECT_EQ(r.discrete, c.discrete);
  EXPECT_EQ(r.draws, c.draws);
  EXPECT_EQ(r.log_lik_est, c.log_lik_est);
  EXPECT_EQ(r.log_prior, c.log_prior);
  EXPECT_EQ(r.accepted, c.accepted);
}

TEST(Io, DatasetCsvUsesLayoutHeader) {
  const ModelSpec lv = [] {
    ModelSpec s = ModelSpec::make(ModelId::lotka_volterra);
    s.lv_horizon = 1.0;
    return s;
  }();
  RngStream s(1, 0);
  const Dataset d = simulate(lv, lv.point({0.01, 0.5, 1.0, 0.01}), draw_latent(lv, 3, s), 3);
  const fs::path dir = scratch("data");
  fs::create_directories(dir);
  write_dataset_csv((dir / "d.csv").string(), d);
  EXPECT_EQ(read_file(dir / "d.csv").substr(0, 8), "X_1,X_2,");
  const Dataset r = read_dataset_csv((dir / "d.csv").string());
  EXPECT_EQ(r.columns, d.columns);
  EXPECT_EQ(r.rows, d.rows);
}

TEST(Io, SummaryCsvColumns) {
  Chain c;
  c.names = {"model", "mu"};
  c.discrete = {true, false};
  for (int t = 0; t < 10; ++t) c.push({t < 7 ? 1.0 : 2.0, 0.1 * t}, 0, 0, t % 2 == 0);
  const fs::path d = scratch("summary");
  fs::create_directories(d);
  write_summary_csv((d / "a.csv").string(), summarize(c, 0));
  write_summary_csv((d / "b.csv").string(), summarize(c, 0), bayes_factor(c.coordinate(0)));
  const auto a = read_csv_header((d / "a.csv").string());
  EXPECT_EQ(a, (std::vector<std::string>{"param", "mean", "l", "u", "ess", "accept_rate"}));
  const std::string b = read_file(d / "b.csv");
  EXPECT_EQ(b.substr(0, b.find('\n')), "param,mean,l,u,ess,accept_rate,bayes_factor,count_model1,count_model2");
  EXPECT_NE(b.find(",7,3\n"), std::string::npos);
}

TEST(Io, ReadCsvRejectsRaggedRows) {
  const fs::path d = scratch("ragged");
  fs::create_directories(d);
  std::ofstream(d / "r.csv") << "a,b\n1,2\n3\n";
  EXPECT_THROW(read_csv((d / "r.csv").string()), IoError);
  EXPECT_THROW(read_csv((d / "missing.csv").string()), IoError);
}

// Every classifier kind survives a JSON round trip with identical logits.
TEST(Io, DiscriminatorJsonRoundTrip) {
  RngStream s(3, 0);
  const Matrix real = Eigen::Map<const Matrix>(sample(s, DistSpec::normal(0, 1), 60).data(), 30, 2);
  const Matrix fake = Eigen::Map<const Matrix>(sample(s, DistSpec::normal(0.8, 1.3), 60).data(), 30, 2);
  std::vector<Discriminator> ds;
  for (auto kind : {ClassifierSpec::Kind::logistic_l1_cv, ClassifierSpec::Kind::random_forest,
                    ClassifierSpec::Kind::neural_net, ClassifierSpec::Kind::constant}) {
    ClassifierSpec cs;
    cs.kind = kind;
    cs.forest.n_trees = 20;
    cs.net.epochs = 50;
    cs.net.hidden = 5;
    RngStream fs = split_one(s);
    ds.push_back(fit(cs, real, fake, fs));
  }
  const ModelSpec nm = ModelSpec::make(ModelId::normal_ls);
  ds.push_back(oracle_discriminator(nm, nm.point({0.3, 1.2}), nm.point({0, 1})));
  for (const Discriminator& d : ds) {
    const Discriminator r = discriminator_from_json(nlohmann::json::parse(to_json(d).dump()));
    EXPECT_EQ(r.kind, d.kind);
    EXPECT_EQ(r.width, d.width);
    for (Eigen::Index i = 0; i < 5; ++i) {
      const Eigen::RowVectorXd row = d.width == 2 ? Eigen::RowVectorXd(real.row(i)) : real.row(i).head(1);
      EXPECT_EQ(r.logit(row), d.logit(row)) << to_string(d.kind);
    }
  }
  nlohmann::json bad = to_json(ds[0]);
  bad["format"] = 99;
  EXPECT_THROW(discriminator_from_json(bad), IoError);
  bad = to_json(ds[0]);
  bad.erase("model");
  EXPECT_THROW(discriminator_from_json(bad), IoError);
}

TEST(Config, ExperimentDefaultsValidate) {
  for (const auto& id : experiment_ids()) EXPECT_TRUE(validate(default_config(id)).empty()) << id;
  EXPECT_THROW(default_config("heston"), ConfigError);
}

TEST(Config, ShippedPresetsValidate) {
  for (const auto& id : experiment_ids())
    for (const char* scale : {"desk", "paper"}) {
      const std::string f = id + "_" + scale + ".toml";
      EXPECT_TRUE(errors_for(f, {}).empty()) << f;
      EXPECT_EQ(load_config(config_path(f)).scale, scale);
    }
}

TEST(Config, AbcNeedsProperPrior) {
  const auto e = errors_for("cir_desk.toml", {"algorithms=[\"abc\"]"});
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0], "algorithms: abc requires proper prior");
}

TEST(Config, McwmNeedsConditionalLatents) {
  const auto e = errors_for("lotka_volterra_desk.toml", {"algorithms=[\"mcwm\"]"});
  ASSERT_EQ(e.size(), 1u);
  EXPECT_NE(e[0].find("no conditional-latent structure"), std::string::npos);
  EXPECT_EQ(e[0].rfind("algorithms:", 0), 0u);
}

TEST(Config, ErrorsNameFieldPaths) {
  const auto e = errors_for("normal_ls_desk.toml", {"sampler.burn_in=1000", "model.truth=[0.0]", "proposal.bogus=1",
                                                    "classifier.kind=\"oracle\"", "algorithms=[\"exact_mh\",\"nope\"]"});
  EXPECT_TRUE(mentions(e, "sampler.burn_in:"));
  EXPECT_TRUE(mentions(e, "model.truth:"));
  EXPECT_TRUE(mentions(e, "proposal.bogus: unknown key"));
  EXPECT_TRUE(mentions(e, "algorithms: unknown algorithm 'nope'"));
  EXPECT_FALSE(mentions(e, "classifier.kind"));  // normal_ls has an oracle
  EXPECT_TRUE(mentions(errors_for("ricker_desk.toml", {"classifier.kind=\"oracle\""}), "classifier.kind:"));
  EXPECT_TRUE(mentions(errors_for("ricker_desk.toml", {"algorithms=[\"exact_mh\"]"}), "no closed-form"));
  EXPECT_TRUE(mentions(errors_for("model_choice_desk.toml", {"algorithms=[\"mhc_debias\"]"}), "discrete"));
  EXPECT_TRUE(mentions(errors_for("normal_ls_desk.toml", {"sampler.nrep=-1"}), "sampler.nrep: expected"));
}

TEST(Config, OverridesParseTomlValues) {
  toml::table t;
  apply_override(t, "sampler.iterations=250");
  apply_override(t, "model.truth=[0.5, 2]");
  apply_override(t, "classifier.kind=random_forest");
  apply_override(t, "experiment=\"cir\"");
  EXPECT_EQ(t.at_path("sampler.iterations").value<int64_t>(), 250);
  EXPECT_EQ(t.at_path("classifier.kind").value<std::string>(), "random_forest");
  EXPECT_EQ(t.at_path("experiment").value<std::string>(), "cir");
  ASSERT_TRUE(t.at_path("model.truth").is_array());
  EXPECT_THROW(apply_override(t, "sampler.iterations.x=1"), ConfigError);
  EXPECT_THROW(apply_override(t, "no_equals"), ConfigError);

  const ExperimentConfig c = load_config(config_path("cir_desk.toml"), {"sampler.iterations=17", "sampler.burn_in=0", "seed=9"});
  EXPECT_EQ(c.iterations, 17u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.data_seed, 9u);
  EXPECT_EQ(c.model.cir_T, 100u);
  EXPECT_EQ(c.exact_scales, (std::vector<double>{0.005, 0.005, 0.005}));
}

TEST(Config, BurnInDefaultsToTenPercent) {
  ExperimentConfig c = default_config("cir");
  c.burn_in.reset();
  c.iterations = 2000;
  EXPECT_EQ(c.burn_in_or_default(), 200u);
}

TEST(Runner, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Runner, StreamIdsDependOnAlgorithmNameOnly) {
  EXPECT_NE(chain_stream_id("mhc_fixed", 0), chain_stream_id("mhc_random", 0));
  EXPECT_NE(chain_stream_id("mhc_fixed", 0), chain_stream_id("mhc_fixed", 1));
  ExperimentConfig a = load_config(config_path("normal_ls_desk.toml"), {"algorithms=[\"exact_mh\",\"mhc_fixed\"]"});
  ExperimentConfig b = load_config(config_path("normal_ls_desk.toml"), {"algorithms=[\"mhc_fixed\"]"});
  const fs::path da = scratch("order_a"), db = scratch("order_b");
  const auto ha = stable_hashes(run_experiment(a, {da.string(), 1, {}}));
  const auto hb = stable_hashes(run_experiment(b, {db.string(), 1, {}}));
  EXPECT_EQ(ha.at("mhc_fixed.chain.csv"), hb.at("mhc_fixed.chain.csv"));
}

TEST(Runner, NormalDeskRunTwiceGivesIdenticalHashes) {
  const ExperimentConfig c = load_config(config_path("normal_ls_desk.toml"), {"seed=7"});
  const fs::path d1 = scratch("det1"), d2 = scratch("det2");
  const RunManifest m1 = run_experiment(c, {d1.string(), 1, {}});
  const RunManifest m2 = run_experiment(c, {d2.string(), 2, {}});
  EXPECT_TRUE(m1.complete);
  EXPECT_EQ(stable_hashes(m1), stable_hashes(m2));
  EXPECT_EQ(stable_hashes(m1).size(), 9u);  // data + 4 x (chain, summary)
  const nlohmann::json j = read_json((d1 / "manifest.json").string());
  EXPECT_TRUE(j["complete"].get<bool>());
  for (const auto& a : j["artifacts"]) EXPECT_EQ(sha256_file((d1 / a["path"].get<std::string>()).string()), a["sha256"]);
  const nlohmann::json meta = read_json((d1 / "mhc_random.meta.json").string());
  EXPECT_EQ(meta["seed"], 7);
  EXPECT_EQ(meta["stream_id"], chain_stream_id("mhc_random", 0));
  EXPECT_EQ(meta["algorithm"], "mhc_random");
  EXPECT_TRUE(meta.contains("wall_clock_seconds"));
  EXPECT_TRUE(meta.contains("acceptance_rate"));
  EXPECT_EQ(meta["prior"]["kind"], "nig");
  EXPECT_EQ(meta["classifier"]["kind"], "logistic_l1_cv");
  EXPECT_EQ(meta["proposal"]["kind"], "gaussian_rw");
}

TEST(Runner, ModelChoiceSummariesCarryBayesFactors) {
  const ExperimentConfig c = load_config(config_path("model_choice_desk.toml"));
  const fs::path d = scratch("mc");
  const RunManifest m = run_experiment(c, {d.string(), 1, {}});
  ASSERT_TRUE(m.complete);
  for (const auto& alg : c.algorithms) {
    const auto h = read_csv_header((d / (alg + ".summary.csv")).string());
    EXPECT_NE(std::find(h.begin(), h.end(), "bayes_factor"), h.end()) << alg;
    EXPECT_NE(std::find(h.begin(), h.end(), "count_model1"), h.end()) << alg;
  }
  EXPECT_TRUE(fs::exists(d / "abc.draws.csv"));
}

TEST(Runner, CirDeskTwoAlgorithms) {
  const ExperimentConfig c = load_config(config_path("cir_desk.toml"),
                                         {"algorithms=[\"exact_mh\",\"mhc_random\"]", "replications=1",
                                          "sampler.iterations=60", "sampler.burn_in=10"});
  const fs::path d = scratch("cir");
  const RunManifest m = run_experiment(c, {d.string(), 2, {}});
  ASSERT_TRUE(m.complete);
  std::size_t chains = 0, summaries = 0;
  for (const auto& a : m.artifacts) {
    chains += a.kind == "chain";
    summaries += a.kind == "summary";
  }
  EXPECT_EQ(chains, 2u);
  EXPECT_EQ(summaries, 2u);
  const Chain ch = read_chain_csv((d / "exact_mh.chain.csv").string());
  EXPECT_EQ(ch.length(), 60u);
  EXPECT_EQ(ch.names, (std::vector<std::string>{"alpha", "beta", "sigma"}));
}

TEST(Runner, ReplicationsGetOwnDataAndFiles) {
  const ExperimentConfig c = load_config(config_path("normal_ls_desk.toml"),
                                         {"algorithms=[\"exact_mh\"]", "replications=2", "sampler.iterations=20",
                                          "sampler.burn_in=2"});
  const fs::path d = scratch("reps");
  ASSERT_TRUE(run_experiment(c, {d.string(), 1, {}}).complete);
  EXPECT_TRUE(fs::exists(d / "exact_mh_rep1.chain.csv"));
  EXPECT_TRUE(fs::exists(d / "exact_mh_rep2.summary.csv"));
  EXPECT_NE(read_file(d / "data_rep1.csv"), read_file(d / "data_rep2.csv"));
}

// One observation cannot train a classifier: mhc_fixed fails hard while
// exact_mh still writes its artifacts.
TEST(Runner, HardFailureKeepsPartialArtifacts) {
  const ExperimentConfig c = load_config(config_path("normal_ls_desk.toml"),
                                         {"algorithms=[\"exact_mh\",\"mhc_fixed\"]", "model.n=1",
                                          "sampler.iterations=20", "sampler.burn_in=2"});
  const fs::path d = scratch("fail");
  const RunManifest m = run_experiment(c, {d.string(), 1, {}});
  EXPECT_FALSE(m.complete);
  ASSERT_EQ(m.failures.size(), 1u);
  EXPECT_EQ(m.failures[0].rfind("mhc_fixed", 0), 0u);
  EXPECT_TRUE(fs::exists(d / "exact_mh.chain.csv"));
  EXPECT_FALSE(read_json((d / "manifest.json").string())["complete"].get<bool>());
}

TEST(Runner, InitFromAbcLandsInPriorBox) {
  ExperimentConfig c = load_config(config_path("lotka_volterra_desk.toml"),
                                   {"init.abc_draws=100", "init.abc_accept=10", "model.n=3"});
  const Dataset real = make_dataset(c, 0);
  const auto init = chain_init(c, real, 0);
  ASSERT_EQ(init.size(), 4u);
  EXPECT_GT(c.prior.log_density(init), kNegInf);
  EXPECT_EQ(init, chain_init(c, real, 0));
}

TEST(Slice, GridParsing) {
  EXPECT_EQ(parse_grid("0:1:3"), (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(parse_grid("2:5:1"), (std::vector<double>{2.0}));
  EXPECT_THROW(parse_grid("0:1"), ConfigError);
  EXPECT_THROW(parse_grid("0:x:3"), ConfigError);
  EXPECT_THROW(parse_grid("0:1:0"), ConfigError);
}

TEST(Slice, ConstantClassifierGivesZeros) {
  const ExperimentConfig c = load_config(config_path("cir_desk.toml"), {"classifier.kind=\"constant\""});
  const CsvTable t = likelihood_slice(c, {"alpha", "sigma"}, {parse_grid("0.05:0.09:3"), parse_grid("0.05:0.08:2")});
  EXPECT_EQ(t.header, (std::vector<std::string>{"alpha", "sigma", "eta", "oracle_log_lik"}));
  ASSERT_EQ(t.rows.size(), 6u);
  for (const auto& r : t.rows) EXPECT_EQ(r[2], 0.0);
}

TEST(Slice, RejectsGridOutsideSupport) {
  const ExperimentConfig c = load_config(config_path("cir_desk.toml"));
  EXPECT_THROW(likelihood_slice(c, {"sigma"}, {parse_grid("-0.1:0.1:3")}), SupportError);
  EXPECT_THROW(likelihood_slice(c, {"gamma"}, {parse_grid("0.1:0.2:3")}), ConfigError);
}

TEST(Slice, SameConfigSameCsv) {
  const ExperimentConfig c = load_config(config_path("cir_desk.toml"), {"sampler.m=20"});
  const auto a = likelihood_slice(c, {"beta"}, {parse_grid("0.1:0.2:3")});
  const auto b = likelihood_slice(c, {"beta"}, {parse_grid("0.1:0.2:3")});
  EXPECT_EQ(a.rows, b.rows);
}

// Oracle discriminator: the alpha slice peaks within one grid step of 0.07.
TEST(Slice, CirOracleAlphaPeak) {
  const ExperimentConfig c = load_config(config_path("cir_paper.toml"), {"classifier.kind=\"oracle\""});
  const CsvTable t = likelihood_slice(c, {"alpha"}, {parse_grid("0.04:0.1:13")});
  std::size_t best = 0;
  for (std::size_t k = 1; k < t.rows.size(); ++k)
    if (t.rows[k][1] > t.rows[best][1]) best = k;
  EXPECT_LE(std::fabs(t.rows[best][0] - 0.07), 0.005 + 1e-12);
}

// Linear classifier on the whole series: the (theta1, theta4) surface has
// its maximum next to (0.01, 0.01).
TEST(Slice, LotkaVolterraSpikeNearTruth) {
  const ExperimentConfig c = load_config(config_path("lotka_volterra_paper.toml"),
                                         {"classifier.kind=\"logistic_l1_cv\"", "model.horizon=10.0"});
  const CsvTable t = likelihood_slice(c, {"theta1", "theta4"}, {parse_grid("0:0.02:5"), parse_grid("0:0.02:5")});
  std::size_t best = 0;
  for (std::size_t k = 1; k < t.rows.size(); ++k)
    if (t.rows[k][2] > t.rows[best][2]) best = k;
  EXPECT_LE(std::fabs(t.rows[best][0] - 0.01), 0.005 + 1e-12);
  EXPECT_LE(std::fabs(t.rows[best][1] - 0.01), 0.005 + 1e-12);
}

TEST(Cli, ExitCodes) {
  const fs::path d = scratch("exe");
  fs::create_directories(d);
  EXPECT_EQ(run_cli("validate --config " + config_path("cir_desk.toml")), 0);
  EXPECT_EQ(run_cli("validate --config " + config_path("cir_desk.toml") + " --set 'algorithms=[\"abc\"]'"), 2);
  EXPECT_EQ(run_cli("list-experiments"), 0);
  EXPECT_EQ(run_cli("run --config " + config_path("normal_ls_desk.toml") + " --out " + (d / "run").string() +
                    " --quiet --set sampler.iterations=20 --set sampler.burn_in=2"),
            0);
  EXPECT_EQ(run_cli("run --config " + config_path("normal_ls_desk.toml") + " --out " + (d / "bad").string() +
                    " --quiet --set model.n=1 --set sampler.iterations=20 --set sampler.burn_in=2"),
            1);
  EXPECT_EQ(run_cli("summarize --chain " + (d / "run" / "exact_mh.chain.csv").string() + " --burn-in 2 --out " +
                    (d / "s.csv").string()),
            0);
  EXPECT_EQ(read_file(d / "s.csv"), read_file(d / "run" / "exact_mh.summary.csv"));
  EXPECT_EQ(run_cli("slice --config " + config_path("cir_desk.toml") +
                    " --param alpha --grid 0.05:0.09:3 --set classifier.kind=constant --out " + (d / "sl.csv").string()),
            0);
  EXPECT_EQ(read_csv((d / "sl.csv").string()).rows.size(), 3u);
}

TEST(Cli, OutputRootFromEnvironment) {
  const fs::path root = scratch("root");
  const std::string cmd = "MHC_OUTPUT_ROOT=" + root.string() + " " + std::string(MHC_CLI_PATH) + " run --config " +
                          config_path("normal_ls_desk.toml") +
                          " --quiet --set sampler.iterations=20 --set sampler.burn_in=2 >/dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(root / "normal_ls_desk" / "manifest.json"));
}

// mhc: run, validate, slice and summarize experiments from TOML configs.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mhc/config.hpp"
#include "mhc/diagnostics.hpp"
#include "mhc/io.hpp"
#include "mhc/runner.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string default_out_dir(const mhc::ExperimentConfig& c) {
  const char* root = std::getenv("MHC_OUTPUT_ROOT");
  if (!root || !*root) return "";
  return (std::filesystem::path(root) / (c.experiment + "_" + c.scale)).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-free Metropolis-Hastings via classification"};
  app.require_subcommand(1);

  std::string config_path, out, param, grid, chain_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::size_t jobs = 1, burn_in = 0;
  bool quiet = false;

  CLI::App* run = app.add_subcommand("run", "Run every configured algorithm and write artifacts");
  run->add_option("--config", config_path, "Experiment TOML file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (default: $MHC_OUTPUT_ROOT/<experiment>_<scale>)");
  CLI::Option* seed_opt = run->add_option("--seed", seed, "Override the top-level seed");
  run->add_option("--jobs", jobs, "Concurrent chains")->check(CLI::PositiveNumber);
  run->add_option("--set", overrides, "Override a config key, e.g. sampler.iterations=200");
  run->add_flag("--quiet", quiet, "No progress lines");

  CLI::App* val = app.add_subcommand("validate", "Check a config and list every problem");
  val->add_option("--config", config_path, "Experiment TOML file")->required()->check(CLI::ExistingFile);
  val->add_option("--set", overrides, "Override a config key");

  CLI::App* slice = app.add_subcommand("slice", "Estimated log-likelihood over a parameter grid");
  slice->add_option("--config", config_path, "Experiment TOML file")->required()->check(CLI::ExistingFile);
  slice->add_option("--param", param, "Parameter name, or two names separated by a comma")->required();
  slice->add_option("--grid", grid, "a:b:steps, or two such grids separated by a comma")->required();
  slice->add_option("--out", out, "Output CSV")->required();
  slice->add_option("--set", overrides, "Override a config key (classifier.kind=constant forces D = 1/2)");

  CLI::App* summ = app.add_subcommand("summarize", "Re-summarize an existing chain CSV");
  summ->add_option("--chain", chain_path, "Chain CSV")->required()->check(CLI::ExistingFile);
  summ->add_option("--burn-in", burn_in, "Draws to discard")->required();
  summ->add_option("--out", out, "Summary CSV (default: stdout)");

  app.add_subcommand("list-experiments", "List experiment ids and their default algorithms");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (*seed_opt) overrides.push_back("seed=" + std::to_string(seed));
      const mhc::ExperimentConfig c = mhc::load_config(config_path, overrides);
      if (out.empty()) out = default_out_dir(c);
      if (out.empty()) {
        std::cerr << "run: --out is required when MHC_OUTPUT_ROOT is unset\n";
        return kExitConfig;
      }
      mhc::RunOptions opt;
      opt.out_dir = out;
      opt.jobs = jobs;
      if (!quiet) opt.log = [](const std::string& s) { std::cerr << s << '\n'; };
      const mhc::RunManifest m = mhc::run_experiment(c, opt);
      std::cout << out << "/manifest.json: " << m.artifacts.size() << " artifacts"
                << (m.complete ? "" : ", INCOMPLETE") << '\n';
      for (const auto& f : m.failures) std::cerr << "failed: " << f << '\n';
      return m.complete ? 0 : kExitFailure;
    }
    if (*val) {
      toml::table t = mhc::load_toml(config_path);
      for (const auto& o : overrides) mhc::apply_override(t, o);
      mhc::ParsedConfig p = mhc::config_from_table(t);
      if (p.built) {
        const auto v = mhc::validate(p.config);
        p.errors.insert(p.errors.end(), v.begin(), v.end());
      }
      for (const auto& e : p.errors) std::cout << e << '\n';
      if (p.errors.empty()) std::cout << "ok\n";
      return p.errors.empty() ? 0 : kExitConfig;
    }
    if (*slice) {
      const mhc::ExperimentConfig c = mhc::load_config(config_path, overrides);
      const auto params = split_commas(param);
      std::vector<std::vector<double>> grids;
      for (const auto& g : split_commas(grid)) grids.push_back(mhc::parse_grid(g));
      mhc::write_csv(out, mhc::likelihood_slice(c, params, grids));
      return 0;
    }
    if (*summ) {
      const mhc::Chain ch = mhc::read_chain_csv(chain_path);
      std::optional<mhc::BayesFactor> bf;
      for (std::size_t j = 0; j < ch.dim(); ++j)
        if (ch.names[j] == "model") bf = mhc::bayes_factor(ch.coordinate(j, burn_in));
      const mhc::PosteriorSummary s = mhc::summarize(ch, burn_in);
      mhc::write_summary_csv(out.empty() ? "/dev/stdout" : out, s, bf);
      return 0;
    }
    for (const auto& id : mhc::experiment_ids()) {
      const mhc::ExperimentConfig c = mhc::default_config(id);
      std::cout << id << ":";
      for (const auto& a : c.algorithms) std::cout << ' ' << a;
      std::cout << '\n';
    }
    return 0;
  } catch (const mhc::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

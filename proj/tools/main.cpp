// Command-line front end: each subcommand loads a JSON experiment config,
// runs it, and writes plot-ready artifacts plus a manifest to --out.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "otdenoise/experiments.hpp"

namespace {

struct Args {
  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed_override = -1;
  int threads = 1;
};

// Subcommand -> experiment kinds it accepts.
const std::map<std::string, std::vector<std::string>> kSubcommands = {
    {"simulate", {"figure1_left"}},
    {"denoise", {"figure2_circle"}},
    {"risk-curve", {"figure1_risk_curve"}},
    {"npmle", {"npmle_pipeline"}},
    {"relax", {"relaxation_demo"}},
    {"descend", {"grad_descent_demo"}},
    {"sweep", {"tau_sweep"}},
};

int run(const Args& args, const std::vector<std::string>& allowed_kinds) {
  nlohmann::json config;
  {
    std::ifstream is(args.config_path);
    if (!is) {
      std::cerr << "error: cannot read config file " << args.config_path << "\n";
      return 2;
    }
    try {
      is >> config;
    } catch (const std::exception& e) {
      std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
      return 2;
    }
  }
  if (args.seed_override >= 0) config["seed"] = args.seed_override;

  try {
    if (!config.contains("kind") || !config.at("kind").is_string())
      throw otdenoise::ConfigError("missing required config field \"kind\"");
    const std::string kind = config.at("kind").get<std::string>();
    bool ok = false;
    for (const auto& k : allowed_kinds) ok = ok || k == kind;
    if (!ok)
      throw otdenoise::ConfigError("config kind \"" + kind +
                                   "\" does not match this subcommand");
    const auto artifacts =
        otdenoise::run_experiment(config, args.out_dir, args.threads);
    for (const auto& a : artifacts) std::cout << args.out_dir << "/" << a << "\n";
    return 0;
  } catch (const otdenoise::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-transport denoising experiments"};
  app.require_subcommand(1);

  std::map<std::string, Args> args;
  for (const auto& [name, kinds] : kSubcommands) {
    auto* sub = app.add_subcommand(name, "run a " + kinds.front() + " experiment");
    Args& a = args[name];
    sub->add_option("--config", a.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", a.out_dir, "output directory");
    sub->add_option("--seed", a.seed_override, "override the config seed");
    sub->add_option("--threads", a.threads, "worker threads for sweep cells")
        ->check(CLI::PositiveNumber);
  }

  CLI11_PARSE(app, argc, argv);

  for (const auto& [name, kinds] : kSubcommands) {
    if (app.got_subcommand(name)) return run(args[name], kinds);
  }
  return 2;
}

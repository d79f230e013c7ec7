// Command-line front end: one subcommand per experiment.
#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "qlocal/harness/experiments.hpp"

namespace {

using nlohmann::json;
using namespace qlocal::harness;

struct Flags {
  std::string config;
  std::string out;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qlocal::ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw qlocal::ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

int run(const std::string& experiment, const Flags& f) {
  json j = read_json(f.config);
  if (!j.is_object()) throw qlocal::ConfigError("config root must be an object");
  if (!j.contains("experiment")) j["experiment"] = experiment;
  if (j["experiment"] != experiment)
    throw qlocal::ConfigError("config is for '" + j["experiment"].get<std::string>() + "', not '" + experiment + "'");
  // Command-line flags win over the file; the manifest echoes the effective config.
  if (f.workers) j["workers"] = *f.workers;
  if (f.seed) j["seed"] = *f.seed;
  ExperimentConfig cfg = parse_config(j);
  ExperimentResult res = run_experiment(cfg);
  write_outputs(res, j, cfg.seed, f.out);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& c : res.checks)
    std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << '\n';
  std::cout << experiment << ": " << (res.passed() ? "passed" : "failed") << " in " << res.wall_time << " s, outputs in "
            << f.out << '\n';
  return res.passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locality of gapped ground-state sectors under local perturbations"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const auto& name : experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", flags.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory for CSV tables and manifest.json")->required();
    sub->add_option("--workers", flags.workers, "worker threads over sweep grids")->check(CLI::PositiveNumber);
    sub->add_option("--seed", flags.seed, "seed for sampled probe observables");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    return run(chosen, flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

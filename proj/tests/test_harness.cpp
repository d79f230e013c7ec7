#include <gtest/gtest.h>

#include <clocale>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "qlocal/harness/experiments.hpp"

using namespace qlocal;
using namespace qlocal::harness;
using nlohmann::json;

namespace {

json small_weak_step() {
  return json::parse(R"({
    "schema_version": 1, "experiment": "weak-step",
    "model": {"preset": "tfim_chain", "n": 6, "J": 0.02, "h": 5.0},
    "mu": 2.0,
    "perturbation": {"site": 2, "op": "field", "strength": 1.0},
    "l_grid": [1, 2, 3], "eps": 0.05
  })");
}

json uncoupled_sequential() {
  return json::parse(R"({
    "schema_version": 1, "experiment": "sequential-coupling",
    "model": {"preset": "xy_ring", "L": 6, "gamma": 1.0},
    "impurities": [{"site": 0, "spins": 1, "preset": "hopping_ramp", "strength": 0.0},
                   {"site": 3, "spins": 1, "preset": "hopping_ramp", "strength": 0.0}],
    "l_grid": [0, 1, 2], "flow": {"ds": 0.25, "n_max": 2}
  })");
}

std::string all_csv(const ExperimentResult& r) {
  std::string s;
  for (const auto& t : r.tables) s += t.file + "\n" + to_csv(t);
  return s;
}

int run_cli(const std::string& args) {
  int rc = std::system((std::string(QLOCAL_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qlocal_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ReferenceConfigsParse) {
  int count = 0;
  for (const auto& e : std::filesystem::directory_iterator(QLOCAL_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    ExperimentConfig c = load_config(e.path().string());
    EXPECT_EQ(c.schema_version, kSchemaVersion);
    EXPECT_NE(std::find(experiment_names().begin(), experiment_names().end(), c.experiment), experiment_names().end());
    ++count;
  }
  EXPECT_GE(count, 10);
}

TEST(Config, DefaultsAndEcho) {
  json j = json{{"experiment", "lr-cone"}};
  ExperimentConfig c = parse_config(j);
  EXPECT_EQ(c.model.preset, "tfim_chain");
  EXPECT_EQ(c.workers, 1);
  EXPECT_FALSE(c.seed);
  EXPECT_EQ(c.source, j);
}

TEST(Config, RejectsBadInput) {
  auto bad = [](const char* text) {
    EXPECT_THROW(parse_config(json::parse(text)), ConfigError) << text;
  };
  bad(R"({"experiment": "lr-cone", "colour": 1})");
  bad(R"({"experiment": "lr-cone", "model": {"preset": "tfim_chain", "nn": 4}})");
  bad(R"({"experiment": "lr-cone", "model": {"n": "ten"}})");
  bad(R"({"experiment": "lr-cone", "model": {"preset": "ising_ladder"}})");
  bad(R"({"experiment": "lr-kone"})");
  bad(R"({"experiment": "lr-cone", "schema_version": 2})");
  bad(R"({"experiment": "tqo", "probes": {"paulis": ["Q"]}})");
  bad(R"({"experiment": "weak-step", "impurities": {"site": 0}})");
  bad(R"([1, 2])");
  EXPECT_THROW(load_config("/nonexistent/qlocal.json"), ConfigError);
}

TEST(Csv, MatchesPrintfInAnyLocale) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> mant(-10.0, 10.0);
  std::uniform_int_distribution<int> ex(-300, 300);
  std::vector<double> xs{0.0, 1.0, -2.5, 0.1, 1e-300, 6.02214076e23};
  for (int i = 0; i < 200; ++i) xs.push_back(std::ldexp(mant(rng), ex(rng)));
  const char* prev = std::setlocale(LC_NUMERIC, "de_DE.UTF-8");
  for (double x : xs) {
    char buf[64];
    std::string want;
    {
      // reference formatting under the C locale
      std::setlocale(LC_NUMERIC, "C");
      std::snprintf(buf, sizeof buf, "%.16e", x);
      want = buf;
      if (prev) std::setlocale(LC_NUMERIC, "de_DE.UTF-8");
    }
    EXPECT_EQ(format_number(x), want);
    EXPECT_EQ(format_number(x).find(','), std::string::npos);
  }
  std::setlocale(LC_NUMERIC, "C");
  EXPECT_EQ(format_number(1.0), "1.0000000000000000e+00");

  Table t{"t.csv", {"l", "error"}, {{1.0, 0.5}}};
  EXPECT_EQ(to_csv(t), "l,error\n1.0000000000000000e+00,5.0000000000000000e-01\n");
  t.add({1.0});
  EXPECT_THROW(to_csv(t), Error);
}

TEST(Records, FitFailureIsRecorded) {
  DecayRecord r;
  r.points = {{1, 1e-2}, {2, 1e-14}, {3, 1e-15}};
  fit_record(r);
  EXPECT_FALSE(r.fit);
  EXPECT_FALSE(r.fit_error.empty());
  r.points = {{1, 1e-1}, {2, 1e-2}, {3, 1e-3}};
  fit_record(r);
  ASSERT_TRUE(r.fit);
  EXPECT_NEAR(r.fit->mu_hat, std::log(10.0), 1e-12);
  EXPECT_TRUE(floor_adjusted_monotone({{1, 1e-3}, {2, 1e-13}, {3, 1e-14}}, 1e-12));
  EXPECT_FALSE(floor_adjusted_monotone({{1, 1e-3}, {2, 2e-3}}, 1e-12));
}

TEST(Harness, ManifestCarriesSchemaAndFits) {
  ExperimentConfig cfg = parse_config(small_weak_step());
  ExperimentResult res = run_experiment(cfg);
  auto dir = scratch("manifest");
  write_outputs(res, cfg.source, std::uint64_t(3), dir.string());
  std::ifstream in(dir / "manifest.json");
  json m = json::parse(in);
  EXPECT_EQ(m["schema_version"], kSchemaVersion);
  EXPECT_EQ(m["config"], cfg.source);
  EXPECT_EQ(m["seed"], 3);
  for (const char* key : {"constants", "fits", "warnings", "wall_time_s", "checks", "tables"})
    EXPECT_TRUE(m.contains(key)) << key;
  for (const auto& f : m["tables"]) EXPECT_TRUE(std::filesystem::exists(dir / f.get<std::string>()));
  std::filesystem::remove_all(dir);
}

TEST(Harness, WorkerCountDoesNotChangeOutputs) {
  json j = small_weak_step();
  ExperimentResult one = run_experiment(parse_config(j));
  j["workers"] = 3;
  ExperimentResult three = run_experiment(parse_config(j));
  EXPECT_EQ(all_csv(one), all_csv(three));
  EXPECT_FALSE(all_csv(one).empty());
}

TEST(Harness, UncoupledSequentialCouplingIsExact) {
  ExperimentResult res = run_experiment(parse_config(uncoupled_sequential()));
  const Table& t = res.table("sequential.csv");
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& row : t.rows)
    for (std::size_t c = 1; c < row.size(); ++c) EXPECT_LT(row[c], 1e-14) << t.columns[c];
  EXPECT_TRUE(res.check("sector_within_blocks").passed);
  EXPECT_TRUE(res.check("factorization_bounded_by_steps").passed);
}

TEST(Cli, ExitCodes) {
  auto dir = scratch("cli");
  std::filesystem::create_directories(dir);
  const std::string ws = (dir / "ws.json").string();
  std::ofstream(ws) << small_weak_step().dump();
  EXPECT_EQ(run_cli("weak-step --config " + ws + " --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "ok" / "manifest.json"));

  // Experiment mismatch, unknown keys and missing files are errors.
  EXPECT_EQ(run_cli("transport --config " + ws + " --out " + (dir / "x").string()), 1);
  const std::string broken = (dir / "broken.json").string();
  std::ofstream(broken) << R"({"experiment": "weak-step", "bogus": true})";
  EXPECT_EQ(run_cli("weak-step --config " + broken + " --out " + (dir / "x").string()), 1);
  EXPECT_EQ(run_cli("weak-step --config " + (dir / "missing.json").string() + " --out x"), 1);
  EXPECT_EQ(run_cli("weak-step --config " + ws + " --out " + (dir / "x").string() + " --workers 0"), 1);

  // A run that completes but fails a check: the decay fit of a zero-strength step has no points above the floor.
  json zero = small_weak_step();
  zero["perturbation"]["strength"] = 0.0;
  const std::string zs = (dir / "zero.json").string();
  std::ofstream(zs) << zero.dump();
  EXPECT_EQ(run_cli("weak-step --config " + zs + " --out " + (dir / "zero").string()), 2);
  std::filesystem::remove_all(dir);
}

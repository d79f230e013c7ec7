#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace qlocal::harness {

inline constexpr int kSchemaVersion = 1;

struct ModelConfig {
  std::string preset = "tfim_chain";  ///< tfim_chain | xy_chain | xy_ring | toric_code
  // tfim_chain / xy_chain
  int n = 10;
  bool periodic = false;
  double J = 1.0;
  double h = 2.0;
  // xy_ring (and the xy_chain potential)
  int L = 10;
  int nu = 1;
  double gamma = 1.0;
  std::vector<double> u;
  // toric_code (uses L)
  double J_star = 1.0;
  double J_plaq = 1.0;
};

struct PerturbationConfig {
  int site = -1;                  ///< -1: n/2 - 1
  std::string op = "field";       ///< field | X | Y | Z
  double strength = 1.0;
  std::vector<double> knots{0.0, 1.0};
  std::vector<double> values{0.0, 1.0};
};

struct ImpurityConfig {
  int site = 0;
  int dim = 2;      ///< impurity Hilbert space dimension (spin models)
  int spins = 1;    ///< impurity spins (xy ring)
  std::string preset = "exchange_ramp";
  double strength = 0.5;
};

struct SectorConfig {
  std::string rule = "fixed";  ///< fixed | window
  int D = 1;
  double width = 0.0;
};

struct LRConeConfig {
  int site = 0;
  std::vector<int> d{1, 2, 3, 4, 5, 6, 7, 8};
  double t_max = 2.0;
  int n_t = 20;
  std::string pauli_a = "Z";
  std::string pauli_b = "Z";
  double front_threshold = 1e-2;  ///< commutator level that marks the arrival of the front
};

struct TransportConfig {
  int n_start = 10;
  int n_cap = 10000;
};

struct FlowConfig {
  double ds = 1e-2;
  int n_max = 2;
  std::string derivative = "resolvent";  ///< resolvent | finite_difference
};

struct CTConfig {
  double z = -1.0;
  int fit_max_distance = 4;
  std::vector<int> blocks{1, 2};
};

struct ProbeConfig {
  std::vector<std::string> paulis{"Z"};
  int random = 0;  ///< extra seeded random Hermitian single-site probes
  bool two_site = false;
};

struct ChecksConfig {
  double min_r2 = 0.9;
  double min_ratio = 10.0;       ///< error(l_min) / error(l_max)
  double flow_tol = 1e-6;
  double halving_min = 3.0;      ///< error(ds) / error(ds/2) window
  double halving_max = 5.0;
  double control_tol = 1e-10;
  double tqo_tol = 1e-10;
  double ct_rel_tol = 0.1;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string experiment;
  ModelConfig model;
  double mu = 1.0;
  PerturbationConfig perturbation;
  std::vector<ImpurityConfig> impurities;
  SectorConfig sector;
  std::vector<int> l_grid;
  double s0 = 0.0;
  double eps = 0.05;
  int gap_checks = 5;
  LRConeConfig lr_cone;
  TransportConfig transport;
  FlowConfig flow;
  CTConfig ct;
  ProbeConfig probes;
  std::string clustering_mode = "bulk";  ///< bulk | impurity
  bool control = true;                   ///< impurity-lppl: also run W = 0
  int lstar = -1;                        ///< toric code L*; -1: L - 1
  double noise_floor = 1e-12;
  ChecksConfig checks;
  std::optional<std::uint64_t> seed;
  int workers = 1;

  nlohmann::json source;  ///< the validated input tree (echoed in the manifest)
};

/// Parses and validates a configuration tree; unknown keys and wrong types raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

const std::vector<std::string>& experiment_names();

}  // namespace qlocal::harness

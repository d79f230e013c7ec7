#include "qlocal/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "qlocal/types.hpp"

namespace qlocal::harness {

using nlohmann::json;

namespace {

// Reads members of one object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void check_pauli(const std::string& p, const std::string& where) {
  if (p.size() != 1 || std::string("IXYZ").find(p[0]) == std::string::npos)
    throw ConfigError(where + ": unknown Pauli '" + p + "'");
}

ModelConfig parse_model(const json& j) {
  ModelConfig m;
  Reader r(j, "model");
  r.get("preset", m.preset);
  r.get("n", m.n);
  r.get("periodic", m.periodic);
  r.get("J", m.J);
  r.get("h", m.h);
  r.get("L", m.L);
  r.get("nu", m.nu);
  r.get("gamma", m.gamma);
  r.get("u", m.u);
  r.get("J_star", m.J_star);
  r.get("J_plaq", m.J_plaq);
  r.finish();
  static const std::set<std::string> presets{"tfim_chain", "xy_chain", "xy_ring", "toric_code"};
  require(presets.count(m.preset) > 0, "model.preset: unknown preset '" + m.preset + "'");
  require(m.n >= 2 && m.n <= 14, "model.n must be in [2, 14]");
  require(m.L >= 2, "model.L must be at least 2");
  return m;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"lr-cone",    "weak-step", "transport", "impurity-lppl",
                                              "clustering", "tqo",       "kato-flow", "ct-profile",
                                              "sequential-coupling"};
  return names;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Reader r(j, "config");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  r.get("experiment", c.experiment);
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    throw ConfigError("unknown experiment '" + c.experiment + "'");

  if (const json* m = r.child("model")) c.model = parse_model(*m);
  r.get("mu", c.mu);
  require(c.mu > 0.0, "mu must be positive");

  if (const json* p = r.child("perturbation")) {
    Reader q(*p, "perturbation");
    q.get("site", c.perturbation.site);
    q.get("op", c.perturbation.op);
    q.get("strength", c.perturbation.strength);
    q.get("knots", c.perturbation.knots);
    q.get("values", c.perturbation.values);
    q.finish();
    if (c.perturbation.op != "field") check_pauli(c.perturbation.op, "perturbation.op");
    require(c.perturbation.knots.size() == c.perturbation.values.size() && c.perturbation.knots.size() >= 2,
                 "perturbation.knots and values must have equal length >= 2");
  }
  if (const json* imps = r.child("impurities")) {
    if (!imps->is_array()) throw ConfigError("impurities: expected an array");
    for (std::size_t i = 0; i < imps->size(); ++i) {
      ImpurityConfig ic;
      Reader q(imps->at(i), "impurities[" + std::to_string(i) + "]");
      q.get("site", ic.site);
      q.get("dim", ic.dim);
      q.get("spins", ic.spins);
      q.get("preset", ic.preset);
      q.get("strength", ic.strength);
      q.finish();
      require(ic.dim >= 1 && ic.spins >= 0, "impurity dim must be >= 1 and spins >= 0");
      c.impurities.push_back(ic);
    }
  }
  if (const json* s = r.child("sector")) {
    Reader q(*s, "sector");
    q.get("rule", c.sector.rule);
    q.get("D", c.sector.D);
    q.get("width", c.sector.width);
    q.finish();
    require(c.sector.rule == "fixed" || c.sector.rule == "window", "sector.rule must be fixed or window");
  }
  r.get("l_grid", c.l_grid);
  for (int l : c.l_grid) require(l >= 0, "l_grid entries must be non-negative");
  r.get("s0", c.s0);
  r.get("eps", c.eps);
  r.get("gap_checks", c.gap_checks);
  require(c.eps > 0.0 && c.s0 >= 0.0 && c.s0 + c.eps <= 1.0 + 1e-12, "need 0 <= s0 < s0 + eps <= 1");

  if (const json* s = r.child("lr_cone")) {
    Reader q(*s, "lr_cone");
    q.get("site", c.lr_cone.site);
    q.get("d", c.lr_cone.d);
    q.get("t_max", c.lr_cone.t_max);
    q.get("n_t", c.lr_cone.n_t);
    q.get("pauli_a", c.lr_cone.pauli_a);
    q.get("pauli_b", c.lr_cone.pauli_b);
    q.get("front_threshold", c.lr_cone.front_threshold);
    q.finish();
    check_pauli(c.lr_cone.pauli_a, "lr_cone.pauli_a");
    check_pauli(c.lr_cone.pauli_b, "lr_cone.pauli_b");
    require(c.lr_cone.n_t >= 1 && c.lr_cone.t_max >= 0.0, "lr_cone: need n_t >= 1 and t_max >= 0");
  }
  if (const json* s = r.child("transport")) {
    Reader q(*s, "transport");
    q.get("n_start", c.transport.n_start);
    q.get("n_cap", c.transport.n_cap);
    q.finish();
    require(c.transport.n_start >= 1 && c.transport.n_cap >= c.transport.n_start, "transport: bad step counts");
  }
  if (const json* s = r.child("flow")) {
    Reader q(*s, "flow");
    q.get("ds", c.flow.ds);
    q.get("n_max", c.flow.n_max);
    q.get("derivative", c.flow.derivative);
    q.finish();
    require(c.flow.derivative == "resolvent" || c.flow.derivative == "finite_difference",
                 "flow.derivative must be resolvent or finite_difference");
  }
  if (const json* s = r.child("ct")) {
    Reader q(*s, "ct");
    q.get("z", c.ct.z);
    q.get("fit_max_distance", c.ct.fit_max_distance);
    q.get("blocks", c.ct.blocks);
    q.finish();
  }
  if (const json* s = r.child("probes")) {
    Reader q(*s, "probes");
    q.get("paulis", c.probes.paulis);
    q.get("random", c.probes.random);
    q.get("two_site", c.probes.two_site);
    q.finish();
    for (const auto& p : c.probes.paulis) check_pauli(p, "probes.paulis");
    require(c.probes.random >= 0, "probes.random must be non-negative");
  }
  r.get("clustering_mode", c.clustering_mode);
  require(c.clustering_mode == "bulk" || c.clustering_mode == "impurity",
               "clustering_mode must be bulk or impurity");
  r.get("control", c.control);
  r.get("lstar", c.lstar);
  r.get("noise_floor", c.noise_floor);
  require(c.noise_floor > 0.0, "noise_floor must be positive");
  if (const json* s = r.child("checks")) {
    Reader q(*s, "checks");
    q.get("min_r2", c.checks.min_r2);
    q.get("min_ratio", c.checks.min_ratio);
    q.get("flow_tol", c.checks.flow_tol);
    q.get("halving_min", c.checks.halving_min);
    q.get("halving_max", c.checks.halving_max);
    q.get("control_tol", c.checks.control_tol);
    q.get("tqo_tol", c.checks.tqo_tol);
    q.get("ct_rel_tol", c.checks.ct_rel_tol);
    q.finish();
  }
  r.get_optional("seed", c.seed);
  r.get("workers", c.workers);
  require(c.workers >= 1, "workers must be at least 1");
  r.finish();
  c.source = j;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace qlocal::harness

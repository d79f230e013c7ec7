#include "qlocal/harness/records.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "qlocal/harness/config.hpp"

namespace qlocal::harness {

using nlohmann::json;

void fit_record(DecayRecord& rec) {
  try {
    rec.fit = fit_decay(rec.points, rec.noise_floor);
    rec.fit_error.clear();
  } catch (const InsufficientData& e) {
    rec.fit.reset();
    rec.fit_error = e.what();
  }
}

bool floor_adjusted_monotone(const std::vector<std::pair<double, double>>& pts, double floor) {
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (std::max(pts[i].second, floor) > std::max(pts[i - 1].second, floor)) return false;
  return true;
}

bool ExperimentResult::passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

const DecayRecord& ExperimentResult::record(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return r;
  throw Error("no decay record named '" + name + "'");
}

const Table& ExperimentResult::table(const std::string& file) const {
  for (const auto& t : tables)
    if (t.file == file) return t;
  throw Error("no table named '" + file + "'");
}

const Check& ExperimentResult::check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw Error("no check named '" + name + "'");
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  // std::to_chars ignores the C locale, so the decimal separator is always '.'.
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) throw Error("table '" + t.file + "': row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  return out;
}

json to_json(const ModelConstants& c) {
  return json{{"mu", c.mu}, {"C_mu", c.C_mu}, {"phi_prime_norm", c.phi_prime_norm},
              {"v", c.v},   {"g", c.g},       {"xi", c.xi}};
}

json to_json(const DecayRecord& r) {
  json j;
  j["name"] = r.name;
  j["variable"] = r.variable;
  json pts = json::array();
  for (auto [x, e] : r.points) pts.push_back({x, e});
  j["points"] = pts;
  j["noise_floor"] = r.noise_floor;
  if (r.fit) {
    j["fit"] = {{"mu_hat", r.fit->mu_hat}, {"C_hat", r.fit->C_hat}, {"r2", r.fit->r2},
                {"slope", r.fit->slope},   {"used", r.fit->used},   {"below_floor", r.fit->below_floor}};
  } else {
    j["fit"] = nullptr;
    j["fit_error"] = r.fit_error;
  }
  j["reference_rate"] = r.reference_rate ? json(*r.reference_rate) : json(nullptr);
  j["constants"] = to_json(r.constants);
  return j;
}

void write_outputs(const ExperimentResult& res, const json& config_echo, std::optional<std::uint64_t> seed,
                   const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json files = json::array();
  for (const auto& t : res.tables) {
    std::ofstream out(fs::path(dir) / t.file, std::ios::binary);
    if (!out) throw Error("cannot write '" + t.file + "' in " + dir);
    out << to_csv(t);
    files.push_back(t.file);
  }
  json m;
  m["schema_version"] = kSchemaVersion;
  m["experiment"] = res.experiment;
  m["config"] = config_echo;
  m["seed"] = seed ? json(*seed) : json(nullptr);
  m["constants"] = res.constants;
  json recs = json::array();
  for (const auto& r : res.records) recs.push_back(to_json(r));
  m["fits"] = recs;
  json checks = json::array();
  for (const auto& c : res.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  m["checks"] = checks;
  m["passed"] = res.passed();
  m["warnings"] = res.warnings;
  m["extra"] = res.extra;
  m["tables"] = files;
  m["wall_time_s"] = res.wall_time;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw Error("cannot write manifest.json in " + dir);
  out << m.dump(2) << '\n';
}

}  // namespace qlocal::harness

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qlocal/fit.hpp"

namespace qlocal::harness {

/// Constants every decay record carries, so a fitted rate can be compared with 1/xi on its own.
struct ModelConstants {
  double mu = 0.0;
  double C_mu = 0.0;
  double phi_prime_norm = 0.0;
  double v = 0.0;
  double g = 0.0;
  double xi = 0.0;
};

struct DecayRecord {
  std::string name;
  std::string variable = "l";
  std::vector<std::pair<double, double>> points;
  double noise_floor = kNoiseFloor;
  std::optional<DecayFit> fit;
  std::string fit_error;                 ///< why the fit is missing
  std::optional<double> reference_rate;  ///< 1/xi (or the analytic rate) when available
  ModelConstants constants;
};

/// Fits `rec.points`; an InsufficientData failure is kept in `fit_error` instead of thrown.
void fit_record(DecayRecord& rec);

/// Each successive point is no larger than the previous one, once both are clamped at the floor.
bool floor_adjusted_monotone(const std::vector<std::pair<double, double>>& pts, double floor);

struct Table {
  std::string file;  ///< relative CSV name
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<Table> tables;
  std::vector<DecayRecord> records;
  nlohmann::json constants = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  double wall_time = 0.0;

  bool passed() const;
  const DecayRecord& record(const std::string& name) const;
  const Table& table(const std::string& file) const;
  const Check& check(const std::string& name) const;
};

/// "%.16e" for every cell: 17 significant digits, '.' separator regardless of locale.
std::string format_number(double x);
std::string to_csv(const Table& t);

nlohmann::json to_json(const ModelConstants& c);
nlohmann::json to_json(const DecayRecord& r);

/// Writes every table as CSV and manifest.json into `dir` (created if missing).
void write_outputs(const ExperimentResult& res, const nlohmann::json& config_echo,
                   std::optional<std::uint64_t> seed, const std::string& dir);

}  // namespace qlocal::harness

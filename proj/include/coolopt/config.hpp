#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "coolopt/counterfactual.hpp"
#include "coolopt/excess_monitor.hpp"
#include "coolopt/review.hpp"
#include "coolopt/surrogate.hpp"
#include "coolopt/synthetic_plant.hpp"
#include "coolopt/telemetry.hpp"

namespace coolopt {

/// File locations. Empty entries default to files inside `output_dir`.
struct PathsConfig {
  std::filesystem::path input;   // telemetry CSV; default <out>/telemetry.csv
  std::filesystem::path model;   // default <out>/model.json
  std::filesystem::path excess;  // default <out>/excess_intervals.csv
  std::filesystem::path ledger;  // default <out>/ledger.csv
  std::filesystem::path output_dir = "out";

  std::filesystem::path input_or_default() const;
  std::filesystem::path model_or_default() const;
  std::filesystem::path excess_or_default() const;
  std::filesystem::path ledger_or_default() const;
};

/// Review settings that come from the config file; the test MAE and the
/// percentile bands come from the model artifact.
struct ReviewSettings {
  double s_min = 0.02;
  int hysteresis_idle_steps = 2;
  double ramp_tsup_limit = 0.5;
  bool reject_out_of_distribution = true;

  ReviewConfig resolve(const SurrogateModel& model) const;
};

struct RunConfig {
  PathsConfig paths;
  TelemetrySchema schema;
  SurrogateConfig surrogate;
  CounterfactualConfig counterfactual;
  TariffSchedule tariff;
  ReviewSettings review;
  ScenarioConfig synth;
  std::optional<int> threads;

  /// Checks every section's invariants; throws InvalidConfig or TariffGap.
  void validate() const;
  /// Sets every seed (scenario, split, regime, booster).
  void set_seed(std::uint64_t seed);
};

/// Parses JSON text. Unknown keys and wrongly typed values raise InvalidConfig;
/// missing keys keep their defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Pretty-printed JSON with every field, suitable for parse_run_config.
std::string dump_run_config(const RunConfig& cfg);

}  // namespace coolopt

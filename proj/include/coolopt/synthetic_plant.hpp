#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "coolopt/physics_features.hpp"
#include "coolopt/telemetry.hpp"

namespace coolopt {

/// Ground-truth accessory power law of the synthetic plant.
struct PlantLaw {
  double k_p = 2e-10;   // MW per (L/s)^3 of total flow
  double base = 0.35;   // MW
  double k_h = 0.01;    // MW per MW of loop heat
  double k_t = 0.02;    // MW per degC of supply temperature
  double t_ref = 25.0;  // degC
  double sigma = 0.01;  // MW, measurement noise on accessory power
  double floor_fraction = 0.05;

  void validate() const;
};

double oracle_accessory_power(const PlantLaw& law, double q_tot, double q_tot_heat, double t_sup, double p_it);

struct MaintenanceWindow {
  Timestamp start{};
  double hours = 0.0;
  double p_it_level = 8.0;  // MW held during the window
};

/// Extra, unmetered pump work: a bypass circulating (multiplier - 1) times the
/// metered flow. Metered flows and temperatures stay at the controller's values.
struct InefficiencyEpisode {
  Timestamp start{};
  double hours = 0.0;
  double flow_multiplier = 1.0;
};

struct ScenarioConfig {
  Timestamp start = slot_time(0);  // replaced by the default below
  int days = 90;
  std::uint64_t seed = 7;

  // IT load profile
  double p_it_mean = 18.0;
  double diurnal_amplitude = 4.0;
  double weekly_dip = 0.0;  // MW removed on weekends
  double workload_amplitude = 0.0;  // MW, weekly workload cycle
  double p_it_jitter = 3.0;         // MW, independent per-interval variation
  double p_it_min = 8.0;
  double p_it_max = 29.0;
  std::vector<MaintenanceWindow> maintenance;

  // Controller policy
  double flow_base = 500.0;    // L/s
  double flow_per_mw = 25.0;   // L/s per MW of IT load
  std::array<double, kLoopCount> flow_share{0.25, 0.45, 0.30};
  std::array<double, kLoopCount> heat_share{0.22, 0.50, 0.28};
  double heat_fraction = 0.95;  // share of IT power rejected to the loops
  double t_sup_mean = 31.0;
  double t_sup_seasonal_amplitude = 0.0;
  double t_sup_daily_amplitude = 0.8;
  double t_sup_jitter = 0.6;  // degC, independent per-interval variation

  PlantLaw law;
  std::vector<InefficiencyEpisode> episodes;

  ScenarioConfig();
  void validate() const;
};

struct SidecarRow {
  Timestamp timestamp{};
  double p_acc_true = 0.0;     // noise-free, actual controller
  double p_acc_nominal = 0.0;  // noise-free, episodes removed
  double true_excess = 0.0;
  bool in_episode = false;
  double flow_multiplier = 1.0;
};

struct Scenario {
  CleanDataset dataset;
  std::vector<SidecarRow> sidecar;
};

/// Deterministic given the config; throws InvalidConfig.
Scenario generate_scenario(const ScenarioConfig& cfg);

/// IT load at `ts` under the scenario profile.
double scenario_it_power(const ScenarioConfig& cfg, Timestamp ts);
/// Supply setpoint at `ts` under the controller schedule.
double scenario_supply_temperature(const ScenarioConfig& cfg, Timestamp ts);

/// Per-interval true excess in MW.
std::vector<double> oracle_excess(const Scenario& scenario, const PlantLaw& law);

/// Injected excess energy in MWh evaluated directly from the config.
double injected_excess_energy(const ScenarioConfig& cfg);

void write_sidecar_csv(const std::filesystem::path& path, const std::vector<SidecarRow>& rows);

}  // namespace coolopt

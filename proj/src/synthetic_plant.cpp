#include "coolopt/synthetic_plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "coolopt/csv.hpp"
#include "coolopt/error.hpp"

namespace coolopt {

namespace {

using namespace std::chrono;

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSecondsPerDay = 86400.0;

double days_since(Timestamp origin, Timestamp ts) {
  return static_cast<double>((ts - origin).count()) / kSecondsPerDay;
}

bool within(Timestamp ts, Timestamp start, double hours) {
  return ts >= start && static_cast<double>((ts - start).count()) < hours * 3600.0;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent pseudo-random value in [-1, 1) per 10-minute slot; a pure
// function of (seed, stream, slot) so profiles can be re-evaluated anywhere.
double step_noise(std::uint64_t seed, std::uint64_t stream, Timestamp ts) {
  const auto h = splitmix64(seed ^ splitmix64(stream ^ static_cast<std::uint64_t>(slot_index(ts))));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

const InefficiencyEpisode* active_episode(const ScenarioConfig& cfg, Timestamp ts) {
  for (const auto& e : cfg.episodes)
    if (within(ts, e.start, e.hours)) return &e;
  return nullptr;
}

struct ControllerState {
  double p_it;
  double t_sup;
  std::array<double, kLoopCount> q;
  std::array<double, kLoopCount> t_ret;
  double q_tot;
  double q_tot_heat;
};

ControllerState controller(const ScenarioConfig& cfg, Timestamp ts) {
  ControllerState s;
  s.p_it = scenario_it_power(cfg, ts);
  s.t_sup = scenario_supply_temperature(cfg, ts);
  s.q_tot = cfg.flow_base + cfg.flow_per_mw * s.p_it;
  const double heat = cfg.heat_fraction * s.p_it;
  s.q_tot_heat = 0.0;
  for (int i = 0; i < kLoopCount; ++i) {
    s.q[i] = cfg.flow_share[i] * s.q_tot;
    const double loop_heat_mw = cfg.heat_share[i] * heat;
    s.t_ret[i] = s.t_sup + loop_heat_mw / (kWaterHeatCapacity * s.q[i]);
    s.q_tot_heat += loop_heat_mw;
  }
  return s;
}

double bypass_power(const PlantLaw& law, double q_tot, double multiplier) {
  return law.k_p * q_tot * q_tot * q_tot * (multiplier * multiplier * multiplier - 1.0);
}

}  // namespace

void PlantLaw::validate() const {
  if (!(k_p >= 0.0 && base >= 0.0 && k_h >= 0.0 && k_t >= 0.0 && sigma >= 0.0))
    throw Error(ErrorCode::InvalidConfig, "plant law coefficients must be >= 0");
  if (!(floor_fraction >= 0.0) || !std::isfinite(t_ref))
    throw Error(ErrorCode::InvalidConfig, "plant law floor and t_ref must be finite and >= 0");
}

double oracle_accessory_power(const PlantLaw& law, double q_tot, double q_tot_heat, double t_sup, double) {
  const double raw = law.base + law.k_p * q_tot * q_tot * q_tot + law.k_h * q_tot_heat - law.k_t * (t_sup - law.t_ref);
  return std::max(raw, law.floor_fraction * law.base);
}

ScenarioConfig::ScenarioConfig() : start(sys_days{year{2023} / January / 1}) {}

void ScenarioConfig::validate() const {
  law.validate();
  if (days <= 0) throw Error(ErrorCode::InvalidConfig, "scenario days must be > 0");
  if (slot_time(slot_index(start)) != start)
    throw Error(ErrorCode::InvalidConfig, "scenario start must lie on the 10-minute grid");
  if (!(p_it_min > 0.0 && p_it_min <= p_it_max))
    throw Error(ErrorCode::InvalidConfig, "need 0 < p_it_min <= p_it_max");
  if (!(flow_base >= 0.0 && flow_per_mw >= 0.0 && flow_base + flow_per_mw * p_it_min > 0.0))
    throw Error(ErrorCode::InvalidConfig, "controller flow must be positive");
  double fs = 0.0, hs = 0.0;
  for (int i = 0; i < kLoopCount; ++i) {
    if (!(flow_share[i] > 0.0) || !(heat_share[i] >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "loop shares must be positive");
    fs += flow_share[i];
    hs += heat_share[i];
  }
  if (std::abs(fs - 1.0) > 1e-9 || std::abs(hs - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidConfig, "loop flow and heat shares must each sum to 1");
  if (!(heat_fraction > 0.0 && heat_fraction <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "heat_fraction must be in (0, 1]");
  for (const auto& e : episodes)
    if (!(e.flow_multiplier >= 1.0) || !(e.hours > 0.0))
      throw Error(ErrorCode::InvalidConfig,
                  fmt::format("episode at {} needs multiplier >= 1 and positive length",
                              format_timestamp(e.start)));
  for (const auto& m : maintenance)
    if (!(m.hours > 0.0)) throw Error(ErrorCode::InvalidConfig, "maintenance windows need positive length");
}

double scenario_it_power(const ScenarioConfig& cfg, Timestamp ts) {
  const double day = days_since(cfg.start, ts);
  const auto dp = floor<days>(ts);
  const double hour = static_cast<double>((ts - dp).count()) / 3600.0;
  const unsigned wd = weekday{dp}.c_encoding();

  double p = cfg.p_it_mean + cfg.diurnal_amplitude * std::sin(kTwoPi * (hour - 9.0) / 24.0) +
             cfg.workload_amplitude * std::sin(kTwoPi * day / 7.0) +
             cfg.p_it_jitter * step_noise(cfg.seed, 1, ts);
  if (wd == 0 || wd == 6) p -= cfg.weekly_dip;
  for (const auto& m : cfg.maintenance)
    if (within(ts, m.start, m.hours)) p = m.p_it_level;
  return std::clamp(p, cfg.p_it_min, cfg.p_it_max);
}

double scenario_supply_temperature(const ScenarioConfig& cfg, Timestamp ts) {
  const double day = days_since(cfg.start, ts);
  const double hour = static_cast<double>((ts - floor<days>(ts)).count()) / 3600.0;
  return cfg.t_sup_mean + cfg.t_sup_seasonal_amplitude * std::sin(kTwoPi * (day - 80.0) / 365.0) +
         cfg.t_sup_daily_amplitude * std::sin(kTwoPi * (hour - 14.0) / 24.0) +
         cfg.t_sup_jitter * step_noise(cfg.seed, 2, ts);
}

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto steps = static_cast<std::size_t>(cfg.days) * 144;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  Scenario out;
  out.dataset.records.reserve(steps);
  out.sidecar.reserve(steps);
  const auto first = slot_index(cfg.start);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto ts = slot_time(first + static_cast<std::int64_t>(k));
    const auto s = controller(cfg, ts);
    const auto* episode = active_episode(cfg, ts);
    const double multiplier = episode ? episode->flow_multiplier : 1.0;

    const double nominal = oracle_accessory_power(cfg.law, s.q_tot, s.q_tot_heat, s.t_sup, s.p_it);
    const double extra = bypass_power(cfg.law, s.q_tot, multiplier);
    const double truth = nominal + extra;
    // Always draw so episodes do not shift the noise stream.
    const double z = noise(rng);
    const double measured = std::max(0.0, truth + cfg.law.sigma * z);

    TelemetryRecord r;
    r.timestamp = ts;
    r.p_it = s.p_it;
    r.t_sup = s.t_sup;
    r.t_ret = s.t_ret;
    r.q = s.q;
    r.p_acc = measured;
    r.p_total = s.p_it + measured;
    r.pue = (s.p_it + measured) / s.p_it;
    out.dataset.records.push_back(r);
    out.sidecar.push_back({ts, truth, nominal, std::max(truth - nominal, 0.0), episode != nullptr, multiplier});
  }
  return out;
}

std::vector<double> oracle_excess(const Scenario& scenario, const PlantLaw& law) {
  std::vector<double> out;
  out.reserve(scenario.dataset.records.size());
  for (std::size_t i = 0; i < scenario.dataset.records.size(); ++i) {
    const auto& r = scenario.dataset.records[i];
    const auto& sc = scenario.sidecar.at(i);
    const auto s = compute_physics(r.p_it, r.t_sup, r.t_ret, r.q, kWaterHeatCapacity);
    const double nominal = oracle_accessory_power(law, s.q_tot, s.q_tot_heat, r.t_sup, r.p_it);
    out.push_back(std::max(sc.p_acc_true - nominal, 0.0));
  }
  return out;
}

double injected_excess_energy(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto first = slot_index(cfg.start);
  const auto last = first + static_cast<std::int64_t>(cfg.days) * 144;
  double energy = 0.0;
  for (auto slot = first; slot < last; ++slot) {
    const auto ts = slot_time(slot);
    const auto* e = active_episode(cfg, ts);
    if (!e) continue;
    const double q_tot = cfg.flow_base + cfg.flow_per_mw * scenario_it_power(cfg, ts);
    energy += bypass_power(cfg.law, q_tot, e->flow_multiplier) / 6.0;
  }
  return energy;
}

void write_sidecar_csv(const std::filesystem::path& path, const std::vector<SidecarRow>& rows) {
  csv::Writer w(path);
  w.row({"timestamp", "p_acc_true", "p_acc_nominal", "true_excess", "episode", "flow_multiplier"});
  for (const auto& r : rows)
    w.row({format_timestamp(r.timestamp), csv::format_double(r.p_acc_true), csv::format_double(r.p_acc_nominal),
           csv::format_double(r.true_excess), r.in_episode ? "1" : "0", csv::format_double(r.flow_multiplier)});
  w.close();
}

}  // namespace coolopt

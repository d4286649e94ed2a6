#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coolopt/excess_monitor.hpp"
#include "coolopt/physics_features.hpp"
#include "coolopt/telemetry.hpp"

namespace coolopt {

struct SurrogateModel;

struct Action {
  double d_tsup = 0.0;  // degC added to the supply setpoint
  double s_dom = 1.0;   // flow scale on the dominant loop
  double s_non = 1.0;   // flow scale on the first non-dominant loop
  double s_non_b = 1.0; // second non-dominant loop; equals s_non unless scaled independently

  bool is_null() const { return d_tsup == 0.0 && s_dom == 1.0 && s_non == 1.0 && s_non_b == 1.0; }
  bool operator==(const Action&) const = default;
};

struct ActionGrid {
  std::vector<double> d_tsup{0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.5};
  std::vector<double> s_dom{1.00, 0.98, 0.96, 0.94, 0.92, 0.90};
  std::vector<double> s_non{1.00, 0.99, 0.98, 0.97, 0.96, 0.95};
  bool independent_non_dominant = false;

  /// Throws InvalidConfig for negative moves or scales outside [flow_floor, 1].
  void validate(double flow_floor) const;
};

/// Cartesian product ordered by d_tsup ascending, then scales descending, so
/// that index order is the tie-break preference. The grid's own order is
/// ignored; duplicates are dropped.
std::vector<Action> enumerate_actions(const ActionGrid& grid);

struct GuardrailConfig {
  double alpha = 0.97;
  double delta_t_min = 0.5;          // K
  std::optional<double> t_sup_max;   // degC; defaults to the training maximum
  double flow_floor = 0.90;

  void validate() const;
};

enum class Guardrail : unsigned {
  PueFloor = 1u << 0,
  CoolingPreserved = 1u << 1,
  MinimumLift = 1u << 2,
  FlowFloor = 1u << 3,
  SupplyCap = 1u << 4,
};
inline constexpr std::array<Guardrail, 5> kGuardrails{Guardrail::PueFloor, Guardrail::CoolingPreserved,
                                                      Guardrail::MinimumLift, Guardrail::FlowFloor,
                                                      Guardrail::SupplyCap};
std::string_view guardrail_name(Guardrail g);
/// Names of the rails in `mask`, joined with '|'; empty for none.
std::string guardrail_names(unsigned mask);

struct ActionOutcome {
  Action action;
  double t_sup_cf = 0.0;
  std::array<double, kLoopCount> q_cf{};
  std::array<double, kLoopCount> delta_t_cf{};
  double q_tot_cf = 0.0;
  double q_tot_heat_cf = 0.0;
  double mean_delta_t_cf = 0.0;
  int regime_cf = 0;
  double p_acc_cf = std::numeric_limits<double>::quiet_NaN();  // NaN until predicted
  double pue_cf = std::numeric_limits<double>::quiet_NaN();
  unsigned failures = 0;  // bitmask of Guardrail
  double saving = 0.0;

  bool feasible() const { return failures == 0; }
};

/// Factual inputs for one interval.
struct FactualPoint {
  const TelemetryRecord* record = nullptr;
  std::span<const double> features;  // regime column filled
  int dominant = 0;
  double q_tot_heat = 0.0;  // factual, unfloored
};

FactualPoint make_factual(const TelemetryRecord& record, std::span<const double> features, double c_w);

/// Resolved limits used by the search.
struct ResolvedGuardrails {
  double alpha;
  double delta_t_min;
  double t_sup_max;
  double flow_floor;
};
ResolvedGuardrails resolve_guardrails(const GuardrailConfig& cfg, const SurrogateModel& model);

/// Builds the counterfactual state and feature row (written into `scratch`,
/// which must have the schema width). Prediction is left to the caller.
ActionOutcome counterfactual_state(const FactualPoint& factual, const Action& action,
                                   const SurrogateModel& model, const FeatureLayout& layout,
                                   const ResolvedGuardrails& rails, std::span<double> scratch);

/// Rails that need no surrogate prediction (all except the PUE floor).
unsigned physical_guardrails(const ActionOutcome& outcome, const FactualPoint& factual,
                             const ResolvedGuardrails& rails);
/// All five rails; requires pue_cf.
unsigned guardrail_check(const ActionOutcome& outcome, const FactualPoint& factual,
                         const ResolvedGuardrails& rails);

double step_saving(double p_acc_actual, double p_acc_cf);

inline constexpr double kSavingTieTolerance = 1e-9;

/// Index of the chosen outcome: the first (in enumeration order) feasible
/// outcome within the tie tolerance of the best saving, or the null action
/// when nothing feasible saves more than zero.
std::size_t select_action(std::span<const ActionOutcome> outcomes);

/// Evaluates every action for one interval. With `skip_infeasible` set,
/// outcomes failing a physical rail are not passed to the surrogate and keep
/// a NaN p_acc_cf. Infeasible outcomes always carry zero saving.
std::vector<ActionOutcome> evaluate_actions(const FactualPoint& factual, std::span<const Action> actions,
                                            const SurrogateModel& model, const FeatureLayout& layout,
                                            const ResolvedGuardrails& rails, bool skip_infeasible = true);

struct LedgerEntry {
  Timestamp timestamp{};
  Action action;
  int dominant_loop = 0;
  double saving = 0.0;  // MW
  double e_save = 0.0;  // MWh
  double c_save = 0.0;  // $
  int regime = 0;
  int regime_cf = 0;
  double pue_cf = 1.0;
  double t_sup_cf = 0.0;
  double q_tot_cf = 0.0;
  double mean_delta_t_cf = 0.0;
  double q_tot_heat_cf = 0.0;
  double p_acc_actual = 0.0;
  double p_acc_cf = 0.0;
  unsigned failures = 0;  // rails violated by the chosen action
  std::uint32_t feasible_actions = 0;
};

struct SavingsGroup {
  std::string key;
  double saving = 0.0;
  double e_save = 0.0;
  double c_save = 0.0;
  std::size_t intervals = 0;
  std::size_t actions = 0;  // intervals with a non-null choice
};

struct SavingsLedger {
  std::vector<LedgerEntry> entries;  // time order
  std::vector<SavingsGroup> by_month, by_hour, by_regime, by_loop;
  std::array<std::size_t, kGuardrails.size()> breaches{};  // among chosen actions

  double total_saving() const;
  double total_energy() const;
  double total_cost() const;
};

struct CounterfactualConfig {
  ActionGrid grid;
  GuardrailConfig guardrails;
  /// When false every action is scored by the surrogate, even ones already
  /// ruled out by a physical rail. The chosen actions are identical.
  bool skip_infeasible_predictions = true;
};

SavingsLedger run_counterfactual(const CleanDataset& dataset, const SurrogateModel& model,
                                 const TariffSchedule& tariff, const CounterfactualConfig& cfg);

/// Rebuilds the month/hour/regime/loop groups and breach counts from entries.
void summarize_ledger(SavingsLedger& ledger);

void write_ledger_csv(const std::filesystem::path& path, const SavingsLedger& ledger);
void write_savings_groups_csv(const std::filesystem::path& path, const std::vector<SavingsGroup>& groups,
                              const char* key_name);
/// Reads a ledger written by write_ledger_csv.
SavingsLedger read_ledger_csv(const std::filesystem::path& path);

}  // namespace coolopt

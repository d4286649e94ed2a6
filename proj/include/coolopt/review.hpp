#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "coolopt/counterfactual.hpp"
#include "coolopt/excess_monitor.hpp"
#include "coolopt/surrogate.hpp"

namespace coolopt {

struct ReviewConfig {
  double s_min = 0.02;    // MW
  double mae_test = 0.0;  // MW
  int hysteresis_idle_steps = 2;
  double ramp_tsup_limit = 0.5;  // degC per step
  TrainPercentiles bounds;
  bool reject_out_of_distribution = true;

  void validate() const;
  double materiality_threshold() const;
};

/// Review settings drawn from a trained model (test MAE, percentile bands).
ReviewConfig review_config_for(const SurrogateModel& model);

bool materiality_filter(double saving, const ReviewConfig& cfg);

struct DistributionFlags {
  bool t_sup = false;
  bool q_tot = false;
  bool mean_delta_t = false;
  bool q_tot_heat = false;

  bool all() const { return t_sup && q_tot && mean_delta_t && q_tot_heat; }
};

DistributionFlags in_distribution_check(double t_sup_cf, double q_tot_cf, double mean_delta_t_cf,
                                        double q_tot_heat_cf, const TrainPercentiles& bounds);
DistributionFlags in_distribution_check(const ActionOutcome& outcome, const TrainPercentiles& bounds);

double capped_capture(double e_save, double e_excess);

/// True when none of the `idle_steps` entries before `candidate` is accepted.
bool hysteresis_filter(std::span<const bool> accepted_so_far, std::size_t candidate, int idle_steps);

struct RampStats {
  std::size_t tsup_violations = 0;
  double max_tsup_step = 0.0;
  double max_s_dom_step = 0.0;
  double max_s_non_step = 0.0;
  double mean_abs_s_dom_step = 0.0;
  double mean_abs_s_non_step = 0.0;
};

RampStats ramp_indicators(std::span<const Action> policy, double tsup_limit);
RampStats ramp_indicators(const SavingsLedger& ledger, double tsup_limit);

struct ReviewRow {
  Timestamp timestamp{};
  Action action;
  double saving = 0.0;
  double e_save = 0.0;
  double e_save_capped = 0.0;
  double c_save = 0.0;
  double c_save_capped = 0.0;
  double e_excess = 0.0;
  bool materiality = false;
  DistributionFlags distribution;
  bool hysteresis = false;
  bool accepted = false;
  unsigned guardrail_failures = 0;
};

struct ReviewTotals {
  double energy = 0.0;  // MWh
  double cost = 0.0;    // $
};

struct ReviewReport {
  std::vector<ReviewRow> rows;
  double excess_energy = 0.0;  // detected excess total, MWh
  ReviewTotals raw, capped, reviewer_raw, reviewer_capped;
  double capture_raw = 0.0;
  double capture_capped = 0.0;
  double capture_reviewer = 0.0;  // reviewer-pass capped total over excess
  std::size_t accepted = 0;
  std::size_t material = 0;
  double action_frequency = 0.0;
  std::array<double, 4> coverage{};  // t_sup, q_tot, mean_delta_t, q_tot_heat; fraction in band
  std::array<std::size_t, kGuardrails.size()> breaches{};
  RampStats ramp_raw;
  RampStats ramp_accepted;
  double median_accepted_saving = 0.0;
};

/// Materiality, then in-distribution, then the hysteresis scan. Throws
/// TimestampMismatch when the ledger and series are not aligned.
ReviewReport build_review(const SavingsLedger& ledger, const ExcessSeries& excess, const ReviewConfig& cfg);

void write_action_log_csv(const std::filesystem::path& path, const ReviewReport& report);
void write_review_summary(const std::filesystem::path& path, const ReviewReport& report,
                          const ReviewConfig& cfg);

}  // namespace coolopt

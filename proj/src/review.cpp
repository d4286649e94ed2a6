#include "coolopt/review.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "coolopt/csv.hpp"
#include "coolopt/error.hpp"

namespace coolopt {

void ReviewConfig::validate() const {
  if (!(s_min > 0.0)) throw Error(ErrorCode::InvalidConfig, "s_min must be > 0");
  if (!(mae_test >= 0.0)) throw Error(ErrorCode::InvalidConfig, "mae_test must be >= 0");
  if (hysteresis_idle_steps < 0) throw Error(ErrorCode::InvalidConfig, "hysteresis_idle_steps must be >= 0");
  if (!(ramp_tsup_limit >= 0.0)) throw Error(ErrorCode::InvalidConfig, "ramp_tsup_limit must be >= 0");
}

double ReviewConfig::materiality_threshold() const { return std::max(s_min, 0.5 * mae_test); }

ReviewConfig review_config_for(const SurrogateModel& model) {
  ReviewConfig cfg;
  cfg.mae_test = model.test_metrics.mae;
  cfg.bounds = model.percentiles;
  return cfg;
}

bool materiality_filter(double saving, const ReviewConfig& cfg) {
  return saving >= cfg.materiality_threshold();
}

DistributionFlags in_distribution_check(double t_sup_cf, double q_tot_cf, double mean_delta_t_cf,
                                        double q_tot_heat_cf, const TrainPercentiles& b) {
  return {b.t_sup.contains(t_sup_cf), b.q_tot.contains(q_tot_cf), b.mean_delta_t.contains(mean_delta_t_cf),
          b.q_tot_heat.contains(q_tot_heat_cf)};
}

DistributionFlags in_distribution_check(const ActionOutcome& o, const TrainPercentiles& bounds) {
  return in_distribution_check(o.t_sup_cf, o.q_tot_cf, o.mean_delta_t_cf, o.q_tot_heat_cf, bounds);
}

double capped_capture(double e_save, double e_excess) { return std::min(e_save, e_excess); }

bool hysteresis_filter(std::span<const bool> accepted_so_far, std::size_t candidate, int idle_steps) {
  const std::size_t window = static_cast<std::size_t>(std::max(idle_steps, 0));
  const std::size_t first = candidate > window ? candidate - window : 0;
  for (std::size_t i = first; i < candidate && i < accepted_so_far.size(); ++i)
    if (accepted_so_far[i]) return false;
  return true;
}

RampStats ramp_indicators(std::span<const Action> policy, double tsup_limit) {
  RampStats s;
  if (policy.size() < 2) return s;
  double dom_sum = 0.0, non_sum = 0.0;
  for (std::size_t i = 1; i < policy.size(); ++i) {
    const double dt = std::abs(policy[i].d_tsup - policy[i - 1].d_tsup);
    const double dd = std::abs(policy[i].s_dom - policy[i - 1].s_dom);
    const double dn = std::max(std::abs(policy[i].s_non - policy[i - 1].s_non),
                               std::abs(policy[i].s_non_b - policy[i - 1].s_non_b));
    if (dt > tsup_limit) ++s.tsup_violations;
    s.max_tsup_step = std::max(s.max_tsup_step, dt);
    s.max_s_dom_step = std::max(s.max_s_dom_step, dd);
    s.max_s_non_step = std::max(s.max_s_non_step, dn);
    dom_sum += dd;
    non_sum += dn;
  }
  const double steps = static_cast<double>(policy.size() - 1);
  s.mean_abs_s_dom_step = dom_sum / steps;
  s.mean_abs_s_non_step = non_sum / steps;
  return s;
}

RampStats ramp_indicators(const SavingsLedger& ledger, double tsup_limit) {
  std::vector<Action> policy;
  policy.reserve(ledger.entries.size());
  for (const auto& e : ledger.entries) policy.push_back(e.action);
  return ramp_indicators(policy, tsup_limit);
}

ReviewReport build_review(const SavingsLedger& ledger, const ExcessSeries& excess, const ReviewConfig& cfg) {
  cfg.validate();
  const auto& entries = ledger.entries;
  if (entries.size() != excess.intervals.size())
    throw Error(ErrorCode::TimestampMismatch,
                fmt::format("ledger has {} intervals, excess series has {}", entries.size(),
                            excess.intervals.size()));
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].timestamp != excess.intervals[i].timestamp)
      throw Error(ErrorCode::TimestampMismatch,
                  fmt::format("row {}: ledger {} vs excess {}", i, format_timestamp(entries[i].timestamp),
                              format_timestamp(excess.intervals[i].timestamp)));

  ReviewReport rep;
  rep.rows.resize(entries.size());
  auto accepted = std::make_unique<bool[]>(entries.size());
  std::vector<Action> accepted_policy(entries.size());
  std::array<std::size_t, 4> in_band{};
  std::vector<double> accepted_savings;

  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    auto& row = rep.rows[i];
    row.timestamp = e.timestamp;
    row.action = e.action;
    row.saving = e.saving;
    row.e_save = e.e_save;
    row.c_save = e.c_save;
    row.e_excess = excess.intervals[i].e_excess;
    row.e_save_capped = capped_capture(e.e_save, row.e_excess);
    row.c_save_capped = e.e_save > 0.0 ? e.c_save * (row.e_save_capped / e.e_save) : 0.0;
    row.guardrail_failures = e.failures;

    row.materiality = materiality_filter(e.saving, cfg);
    row.distribution = in_distribution_check(e.t_sup_cf, e.q_tot_cf, e.mean_delta_t_cf, e.q_tot_heat_cf, cfg.bounds);
    in_band[0] += row.distribution.t_sup;
    in_band[1] += row.distribution.q_tot;
    in_band[2] += row.distribution.mean_delta_t;
    in_band[3] += row.distribution.q_tot_heat;
    const bool in_dist_ok = row.distribution.all() || !cfg.reject_out_of_distribution;
    row.hysteresis = hysteresis_filter(std::span<const bool>(accepted.get(), i), i, cfg.hysteresis_idle_steps);
    row.accepted = row.materiality && in_dist_ok && row.hysteresis && e.failures == 0;
    accepted[i] = row.accepted;

    rep.material += row.materiality;
    rep.excess_energy += row.e_excess;
    rep.raw.energy += e.e_save;
    rep.raw.cost += e.c_save;
    rep.capped.energy += row.e_save_capped;
    rep.capped.cost += row.c_save_capped;
    if (row.accepted) {
      ++rep.accepted;
      rep.reviewer_raw.energy += e.e_save;
      rep.reviewer_raw.cost += e.c_save;
      rep.reviewer_capped.energy += row.e_save_capped;
      rep.reviewer_capped.cost += row.c_save_capped;
      accepted_policy[i] = e.action;
      accepted_savings.push_back(e.saving);
    }
  }

  const double n = static_cast<double>(entries.size());
  if (!entries.empty()) {
    rep.action_frequency = static_cast<double>(rep.accepted) / n;
    for (std::size_t k = 0; k < 4; ++k) rep.coverage[k] = static_cast<double>(in_band[k]) / n;
  }
  if (rep.excess_energy > 0.0) {
    rep.capture_raw = rep.raw.energy / rep.excess_energy;
    rep.capture_capped = rep.capped.energy / rep.excess_energy;
    rep.capture_reviewer = rep.reviewer_capped.energy / rep.excess_energy;
  }
  for (const auto& e : entries)
    for (std::size_t k = 0; k < kGuardrails.size(); ++k)
      if (e.failures & static_cast<unsigned>(kGuardrails[k])) ++rep.breaches[k];
  rep.ramp_raw = ramp_indicators(ledger, cfg.ramp_tsup_limit);
  rep.ramp_accepted = ramp_indicators(accepted_policy, cfg.ramp_tsup_limit);
  if (!accepted_savings.empty()) rep.median_accepted_saving = percentile(accepted_savings, 0.5);
  return rep;
}

void write_action_log_csv(const std::filesystem::path& path, const ReviewReport& report) {
  csv::Writer w(path);
  w.row({"timestamp", "d_tsup", "s_dom", "s_non", "s_non_b", "saving_MW", "e_save_MWh", "e_save_capped_MWh",
         "c_save_usd", "c_save_capped_usd", "e_excess_MWh", "materiality", "in_dist_t_sup", "in_dist_q_tot",
         "in_dist_mean_delta_t", "in_dist_q_tot_heat", "hysteresis", "accepted", "guardrails"});
  auto f = [](double v) { return csv::format_double(v); };
  auto b = [](bool v) { return std::string(v ? "1" : "0"); };
  for (const auto& r : report.rows)
    w.row({format_timestamp(r.timestamp), f(r.action.d_tsup), f(r.action.s_dom), f(r.action.s_non),
           f(r.action.s_non_b), f(r.saving), f(r.e_save), f(r.e_save_capped), f(r.c_save), f(r.c_save_capped),
           f(r.e_excess), b(r.materiality), b(r.distribution.t_sup), b(r.distribution.q_tot),
           b(r.distribution.mean_delta_t), b(r.distribution.q_tot_heat), b(r.hysteresis), b(r.accepted),
           r.guardrail_failures ? guardrail_names(r.guardrail_failures) : std::string("ok")});
  w.close();
}

void write_review_summary(const std::filesystem::path& path, const ReviewReport& r, const ReviewConfig& cfg) {
  csv::Writer w(path);
  w.row({"key", "value"});
  auto put = [&](std::string key, double v) { w.row({std::move(key), csv::format_double(v)}); };
  auto count = [&](std::string key, std::size_t v) { w.row({std::move(key), std::to_string(v)}); };
  count("intervals", r.rows.size());
  put("materiality_threshold_MW", cfg.materiality_threshold());
  put("excess_total_MWh", r.excess_energy);
  put("raw_total_MWh", r.raw.energy);
  put("raw_total_usd", r.raw.cost);
  put("capped_total_MWh", r.capped.energy);
  put("capped_total_usd", r.capped.cost);
  put("reviewer_raw_total_MWh", r.reviewer_raw.energy);
  put("reviewer_raw_total_usd", r.reviewer_raw.cost);
  put("reviewer_capped_total_MWh", r.reviewer_capped.energy);
  put("reviewer_capped_total_usd", r.reviewer_capped.cost);
  put("capture_rate_raw", r.capture_raw);
  put("capture_rate_capped", r.capture_capped);
  put("capture_rate_reviewer", r.capture_reviewer);
  count("material_intervals", r.material);
  count("accepted_actions", r.accepted);
  put("action_frequency", r.action_frequency);
  put("median_accepted_saving_MW", r.median_accepted_saving);
  put("coverage_t_sup", r.coverage[0]);
  put("coverage_q_tot", r.coverage[1]);
  put("coverage_mean_delta_t", r.coverage[2]);
  put("coverage_q_tot_heat", r.coverage[3]);
  for (std::size_t k = 0; k < kGuardrails.size(); ++k)
    count(fmt::format("breaches_{}", guardrail_name(kGuardrails[k])), r.breaches[k]);
  count("ramp_violations_raw", r.ramp_raw.tsup_violations);
  count("ramp_violations_accepted", r.ramp_accepted.tsup_violations);
  put("max_s_dom_step_raw", r.ramp_raw.max_s_dom_step);
  put("max_s_non_step_raw", r.ramp_raw.max_s_non_step);
  w.close();
}

}  // namespace coolopt

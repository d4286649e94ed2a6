#include "coolopt/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "coolopt/csv.hpp"
#include "coolopt/error.hpp"
#include "coolopt/surrogate.hpp"

namespace coolopt {

void ActionGrid::validate(double flow_floor) const {
  if (d_tsup.empty() || s_dom.empty() || s_non.empty())
    throw Error(ErrorCode::InvalidConfig, "action grid axes must be non-empty");
  for (double d : d_tsup)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw Error(ErrorCode::InvalidConfig, fmt::format("supply move {} must be finite and >= 0", d));
  for (const auto* axis : {&s_dom, &s_non})
    for (double s : *axis)
      if (!(s >= flow_floor && s <= 1.0))
        throw Error(ErrorCode::InvalidConfig,
                    fmt::format("flow scale {} outside [{}, 1]", s, flow_floor));
}

std::vector<Action> enumerate_actions(const ActionGrid& grid) {
  auto sorted = [](std::vector<double> v, bool ascending) {
    if (ascending) std::sort(v.begin(), v.end());
    else std::sort(v.begin(), v.end(), std::greater<>());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const auto moves = sorted(grid.d_tsup, true);
  const auto dom = sorted(grid.s_dom, false);
  const auto non = sorted(grid.s_non, false);
  std::vector<Action> out;
  for (double d : moves)
    for (double sd : dom)
      for (double sa : non) {
        if (!grid.independent_non_dominant) {
          out.push_back({d, sd, sa, sa});
          continue;
        }
        for (double sb : non) out.push_back({d, sd, sa, sb});
      }
  return out;
}

void GuardrailConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be in (0, 1]");
  if (!(delta_t_min > 0.0)) throw Error(ErrorCode::InvalidConfig, "delta_t_min must be > 0");
  if (!(flow_floor > 0.0 && flow_floor <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "flow_floor must be in (0, 1]");
  if (t_sup_max && !std::isfinite(*t_sup_max))
    throw Error(ErrorCode::InvalidConfig, "t_sup_max must be finite");
}

std::string_view guardrail_name(Guardrail g) {
  switch (g) {
    case Guardrail::PueFloor: return "pue_floor";
    case Guardrail::CoolingPreserved: return "cooling_preserved";
    case Guardrail::MinimumLift: return "minimum_lift";
    case Guardrail::FlowFloor: return "flow_floor";
    case Guardrail::SupplyCap: return "supply_cap";
  }
  return "unknown";
}

std::string guardrail_names(unsigned mask) {
  std::string out;
  for (auto g : kGuardrails)
    if (mask & static_cast<unsigned>(g)) {
      if (!out.empty()) out += '|';
      out += guardrail_name(g);
    }
  return out;
}

FactualPoint make_factual(const TelemetryRecord& record, std::span<const double> features, double c_w) {
  const auto s = compute_physics(record.p_it, record.t_sup, record.t_ret, record.q, c_w);
  return {&record, features, dominant_loop(s.q_heat), s.q_tot_heat};
}

ResolvedGuardrails resolve_guardrails(const GuardrailConfig& cfg, const SurrogateModel& model) {
  cfg.validate();
  return {cfg.alpha, cfg.delta_t_min, cfg.t_sup_max.value_or(model.t_sup_max_observed), cfg.flow_floor};
}

ActionOutcome counterfactual_state(const FactualPoint& factual, const Action& action,
                                   const SurrogateModel& model, const FeatureLayout& layout,
                                   const ResolvedGuardrails& rails, std::span<double> scratch) {
  if (scratch.size() != factual.features.size())
    throw Error(ErrorCode::FeatureCountMismatch, "scratch row width differs from features");
  const auto& r = *factual.record;
  ActionOutcome o;
  o.action = action;
  o.t_sup_cf = std::min(r.t_sup + action.d_tsup, rails.t_sup_max);

  bool first_non = true;
  for (int i = 0; i < kLoopCount; ++i) {
    double scale = action.s_dom;
    if (i != factual.dominant) {
      scale = first_non ? action.s_non : action.s_non_b;
      first_non = false;
    }
    o.q_cf[i] = scale * r.q[i];
  }

  const auto s = compute_physics(r.p_it, o.t_sup_cf, r.t_ret, o.q_cf, model.feature_config.c_w,
                                 rails.delta_t_min);
  o.delta_t_cf = s.delta_t;
  o.q_tot_cf = s.q_tot;
  o.q_tot_heat_cf = s.q_tot_heat;
  o.mean_delta_t_cf = s.mean_delta_t;
  o.regime_cf = assign_regime(model.regimes, s.q_tot, o.t_sup_cf);

  std::copy(factual.features.begin(), factual.features.end(), scratch.begin());
  scratch[layout.t_sup] = o.t_sup_cf;
  for (int i = 0; i < kLoopCount; ++i) scratch[layout.q[i]] = o.q_cf[i];
  write_physics(scratch, layout, s);
  write_regime(scratch, layout, o.regime_cf);
  return o;
}

unsigned physical_guardrails(const ActionOutcome& o, const FactualPoint& factual,
                             const ResolvedGuardrails& rails) {
  const auto& r = *factual.record;
  unsigned fail = 0;
  if (!(o.q_tot_heat_cf >= rails.alpha * factual.q_tot_heat))
    fail |= static_cast<unsigned>(Guardrail::CoolingPreserved);
  for (int i = 0; i < kLoopCount; ++i) {
    if (!(o.delta_t_cf[i] >= rails.delta_t_min)) fail |= static_cast<unsigned>(Guardrail::MinimumLift);
    if (!(o.q_cf[i] >= rails.flow_floor * r.q[i])) fail |= static_cast<unsigned>(Guardrail::FlowFloor);
  }
  if (!(o.t_sup_cf <= rails.t_sup_max)) fail |= static_cast<unsigned>(Guardrail::SupplyCap);
  return fail;
}

unsigned guardrail_check(const ActionOutcome& o, const FactualPoint& factual,
                         const ResolvedGuardrails& rails) {
  unsigned fail = physical_guardrails(o, factual, rails);
  if (!(o.pue_cf >= 1.0)) fail |= static_cast<unsigned>(Guardrail::PueFloor);
  return fail;
}

double step_saving(double p_acc_actual, double p_acc_cf) { return std::max(p_acc_actual - p_acc_cf, 0.0); }

std::size_t select_action(std::span<const ActionOutcome> outcomes) {
  double best = 0.0;
  for (const auto& o : outcomes)
    if (o.feasible()) best = std::max(best, o.saving);
  std::size_t null_index = outcomes.size();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].action.is_null() && null_index == outcomes.size()) null_index = i;
    if (best > 0.0 && outcomes[i].feasible() && outcomes[i].saving >= best - kSavingTieTolerance)
      return i;
  }
  if (null_index == outcomes.size())
    throw Error(ErrorCode::InvalidConfig, "action list lacks the null action");
  return null_index;
}

namespace {

void evaluate_into(const FactualPoint& factual, std::span<const Action> actions, const SurrogateModel& model,
                   const FeatureLayout& layout, const ResolvedGuardrails& rails, bool skip_infeasible,
                   std::span<double> scratch, std::vector<ActionOutcome>& out) {
  out.clear();
  for (const auto& a : actions) {
    auto o = counterfactual_state(factual, a, model, layout, rails, scratch);
    o.failures = physical_guardrails(o, factual, rails);
    if (o.failures == 0 || !skip_infeasible) {
      o.p_acc_cf = predict_accessory_power(model, scratch);
      o.pue_cf = implied_pue(factual.record->p_it, o.p_acc_cf);
      o.failures = guardrail_check(o, factual, rails);
      if (o.failures == 0) o.saving = step_saving(factual.record->p_acc, o.p_acc_cf);
    }
    out.push_back(o);
  }
}

}  // namespace

std::vector<ActionOutcome> evaluate_actions(const FactualPoint& factual, std::span<const Action> actions,
                                            const SurrogateModel& model, const FeatureLayout& layout,
                                            const ResolvedGuardrails& rails, bool skip_infeasible) {
  std::vector<double> scratch(factual.features.size());
  std::vector<ActionOutcome> out;
  out.reserve(actions.size());
  evaluate_into(factual, actions, model, layout, rails, skip_infeasible, scratch, out);
  return out;
}

double SavingsLedger::total_saving() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.saving;
  return s;
}
double SavingsLedger::total_energy() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.e_save;
  return s;
}
double SavingsLedger::total_cost() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.c_save;
  return s;
}

void summarize_ledger(SavingsLedger& ledger) {
  using namespace std::chrono;
  std::map<std::string, SavingsGroup> month;
  std::map<int, SavingsGroup> hour, regime, loop;
  ledger.breaches.fill(0);
  auto add = [](SavingsGroup& g, const LedgerEntry& e) {
    g.saving += e.saving;
    g.e_save += e.e_save;
    g.c_save += e.c_save;
    ++g.intervals;
    if (!e.action.is_null()) ++g.actions;
  };
  for (const auto& e : ledger.entries) {
    const auto dp = floor<days>(e.timestamp);
    const year_month_day ymd{dp};
    add(month[fmt::format("{:04}-{:02}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()))], e);
    add(hour[static_cast<int>(duration_cast<hours>(e.timestamp - dp).count())], e);
    add(regime[e.regime], e);
    add(loop[e.dominant_loop], e);
    for (std::size_t k = 0; k < kGuardrails.size(); ++k)
      if (e.failures & static_cast<unsigned>(kGuardrails[k])) ++ledger.breaches[k];
  }
  auto flatten = [](auto& groups, std::vector<SavingsGroup>& out, auto key) {
    out.clear();
    for (auto& [k, g] : groups) {
      g.key = key(k);
      out.push_back(g);
    }
  };
  flatten(month, ledger.by_month, [](const std::string& k) { return k; });
  auto num = [](int k) { return std::to_string(k); };
  flatten(hour, ledger.by_hour, num);
  flatten(regime, ledger.by_regime, num);
  flatten(loop, ledger.by_loop, num);
}

SavingsLedger run_counterfactual(const CleanDataset& dataset, const SurrogateModel& model,
                                 const TariffSchedule& tariff, const CounterfactualConfig& cfg) {
  tariff.validate();
  const auto rails = resolve_guardrails(cfg.guardrails, model);
  cfg.grid.validate(rails.flow_floor);
  const auto actions = enumerate_actions(cfg.grid);
  const auto X = surrogate_features(model, dataset);
  const auto layout = FeatureLayout::resolve(model.schema);

  SavingsLedger ledger;
  ledger.entries.resize(X.rows);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, X.rows, 16), [&](const tbb::blocked_range<std::size_t>& range) {
    std::vector<double> scratch(X.cols);
    std::vector<ActionOutcome> outcomes;
    outcomes.reserve(actions.size());
    for (auto i = range.begin(); i != range.end(); ++i) {
      const auto& rec = dataset.records[i];
      const auto factual = make_factual(rec, X.row(i), model.feature_config.c_w);
      evaluate_into(factual, actions, model, layout, rails, cfg.skip_infeasible_predictions, scratch, outcomes);
      const auto& chosen = outcomes[select_action(outcomes)];
      std::uint32_t feasible = 0;
      for (const auto& o : outcomes) feasible += o.feasible() ? 1u : 0u;

      auto& e = ledger.entries[i];
      e.timestamp = rec.timestamp;
      e.action = chosen.action;
      e.dominant_loop = factual.dominant;
      e.saving = chosen.saving;
      e.e_save = e.saving * kStepHours;
      e.c_save = e.e_save * 1000.0 * tariff.price_at(rec.timestamp);
      e.regime = assign_regime(model.regimes, X.at(i, layout.q_tot), rec.t_sup);
      e.regime_cf = chosen.regime_cf;
      e.pue_cf = chosen.pue_cf;
      e.t_sup_cf = chosen.t_sup_cf;
      e.q_tot_cf = chosen.q_tot_cf;
      e.mean_delta_t_cf = chosen.mean_delta_t_cf;
      e.q_tot_heat_cf = chosen.q_tot_heat_cf;
      e.p_acc_actual = rec.p_acc;
      e.p_acc_cf = chosen.p_acc_cf;
      e.failures = chosen.failures;
      e.feasible_actions = feasible;
    }
  });
  summarize_ledger(ledger);
  return ledger;
}

namespace {

const std::vector<std::string> kLedgerHeader{
    "timestamp",  "d_tsup",        "s_dom",       "s_non",         "dominant_loop",
    "saving_MW",  "e_save_MWh",    "c_save_usd",  "regime",        "regime_cf",
    "pue_cf",     "t_sup_cf",      "q_tot_cf",    "mean_delta_t_cf", "q_tot_heat_cf",
    "p_acc",      "p_acc_cf",      "s_non_b",     "guardrail_failures", "feasible_actions"};

}  // namespace

void write_ledger_csv(const std::filesystem::path& path, const SavingsLedger& ledger) {
  csv::Writer w(path);
  w.row(kLedgerHeader);
  auto f = [](double v) { return csv::format_double(v); };
  for (const auto& e : ledger.entries)
    w.row({format_timestamp(e.timestamp), f(e.action.d_tsup), f(e.action.s_dom), f(e.action.s_non),
           std::to_string(e.dominant_loop), f(e.saving), f(e.e_save), f(e.c_save),
           std::to_string(e.regime), std::to_string(e.regime_cf), f(e.pue_cf), f(e.t_sup_cf),
           f(e.q_tot_cf), f(e.mean_delta_t_cf), f(e.q_tot_heat_cf), f(e.p_acc_actual), f(e.p_acc_cf),
           f(e.action.s_non_b), guardrail_names(e.failures), std::to_string(e.feasible_actions)});
  w.close();
}

void write_savings_groups_csv(const std::filesystem::path& path, const std::vector<SavingsGroup>& groups,
                              const char* key_name) {
  csv::Writer w(path);
  w.row({key_name, "saving_MW_sum", "e_save_MWh", "c_save_usd", "intervals", "actions"});
  for (const auto& g : groups)
    w.row({g.key, csv::format_double(g.saving), csv::format_double(g.e_save), csv::format_double(g.c_save),
           std::to_string(g.intervals), std::to_string(g.actions)});
  w.close();
}

SavingsLedger read_ledger_csv(const std::filesystem::path& path) {
  const auto table = csv::read_table(path);
  std::vector<std::size_t> col;
  for (const auto& name : kLedgerHeader) col.push_back(table.require_column(name));
  SavingsLedger ledger;
  ledger.entries.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    auto cell = [&](std::size_t k) -> const std::string& {
      if (col[k] >= row.size())
        throw Error(ErrorCode::RowParseError, fmt::format("{}:{}: missing column {}", path.string(), line, kLedgerHeader[k]));
      return row[col[k]];
    };
    auto num = [&](std::size_t k) {
      const auto& c = cell(k);
      if (csv::trim(c).empty()) return std::numeric_limits<double>::quiet_NaN();
      auto v = csv::parse_double(c);
      if (!v)
        throw Error(ErrorCode::RowParseError,
                    fmt::format("{}:{}: bad value in {}", path.string(), line, kLedgerHeader[k]));
      return *v;
    };
    LedgerEntry e;
    const auto ts = parse_timestamp(cell(0));
    if (!ts) throw Error(ErrorCode::RowParseError, fmt::format("{}:{}: bad timestamp", path.string(), line));
    e.timestamp = *ts;
    e.action = {num(1), num(2), num(3), num(17)};
    e.dominant_loop = static_cast<int>(num(4));
    e.saving = num(5);
    e.e_save = num(6);
    e.c_save = num(7);
    e.regime = static_cast<int>(num(8));
    e.regime_cf = static_cast<int>(num(9));
    e.pue_cf = num(10);
    e.t_sup_cf = num(11);
    e.q_tot_cf = num(12);
    e.mean_delta_t_cf = num(13);
    e.q_tot_heat_cf = num(14);
    e.p_acc_actual = num(15);
    e.p_acc_cf = num(16);
    const auto& names = cell(18);
    for (auto g : kGuardrails)
      if (names.find(guardrail_name(g)) != std::string::npos) e.failures |= static_cast<unsigned>(g);
    e.feasible_actions = static_cast<std::uint32_t>(num(19));
    ledger.entries.push_back(e);
  }
  summarize_ledger(ledger);
  return ledger;
}

}  // namespace coolopt

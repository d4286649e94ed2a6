#include "coolopt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "coolopt/error.hpp"
#include "json.hpp"

namespace coolopt {

using nlohmann::json;

namespace fs = std::filesystem;

fs::path PathsConfig::input_or_default() const { return input.empty() ? output_dir / "telemetry.csv" : input; }
fs::path PathsConfig::model_or_default() const { return model.empty() ? output_dir / "model.json" : model; }
fs::path PathsConfig::excess_or_default() const {
  return excess.empty() ? output_dir / "excess_intervals.csv" : excess;
}
fs::path PathsConfig::ledger_or_default() const { return ledger.empty() ? output_dir / "ledger.csv" : ledger; }

ReviewConfig ReviewSettings::resolve(const SurrogateModel& model) const {
  ReviewConfig cfg = review_config_for(model);
  cfg.s_min = s_min;
  cfg.hysteresis_idle_steps = hysteresis_idle_steps;
  cfg.ramp_tsup_limit = ramp_tsup_limit;
  cfg.reject_out_of_distribution = reject_out_of_distribution;
  return cfg;
}

void RunConfig::validate() const {
  if (paths.output_dir.empty()) throw Error(ErrorCode::InvalidConfig, "paths.output_dir is empty");
  surrogate.train.validate();
  if (!(surrogate.test_fraction > 0.0 && surrogate.test_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "split.test_fraction must be in (0, 1)");
  if (surrogate.features.lags.empty() || surrogate.features.windows.empty())
    throw Error(ErrorCode::InvalidConfig, "features.lags and features.windows must be non-empty");
  for (int v : surrogate.features.lags)
    if (v < 1) throw Error(ErrorCode::InvalidConfig, "features.lags entries must be >= 1");
  for (int v : surrogate.features.windows)
    if (v < 1) throw Error(ErrorCode::InvalidConfig, "features.windows entries must be >= 1");
  if (!(surrogate.features.c_w > 0.0)) throw Error(ErrorCode::InvalidConfig, "features.c_w must be > 0");
  counterfactual.guardrails.validate();
  counterfactual.grid.validate(counterfactual.guardrails.flow_floor);
  tariff.validate();
  ReviewConfig r;
  r.s_min = review.s_min;
  r.hysteresis_idle_steps = review.hysteresis_idle_steps;
  r.ramp_tsup_limit = review.ramp_tsup_limit;
  r.validate();
  synth.validate();
  if (threads && *threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be >= 1");
}

void RunConfig::set_seed(std::uint64_t seed) {
  synth.seed = seed;
  surrogate.split_seed = seed;
  surrogate.regime_seed = seed;
  surrogate.train.seed = seed;
}

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers (usually typos) can be reported.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(ErrorCode::InvalidConfig, name_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, name_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  void get_path(const char* key, fs::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  void get_timestamp(const char* key, Timestamp& out) {
    std::string s = format_timestamp(out);
    get(key, s);
    const auto ts = parse_timestamp(s);
    if (!ts) throw Error(ErrorCode::InvalidConfig, name_ + "." + key + ": bad timestamp '" + s + "'");
    out = *ts;
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return Section(it == j_.end() ? empty() : *it, name_.empty() ? key : name_ + "." + key);
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  const std::string& name() const { return name_; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k))
        throw Error(ErrorCode::InvalidConfig, "unknown key " + (name_.empty() ? k : name_ + "." + k));
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_law(Section s, PlantLaw& law) {
  s.get("k_p", law.k_p);
  s.get("base", law.base);
  s.get("k_h", law.k_h);
  s.get("k_t", law.k_t);
  s.get("t_ref", law.t_ref);
  s.get("sigma", law.sigma);
  s.get("floor_fraction", law.floor_fraction);
  s.finish();
}

void read_synth(Section s, ScenarioConfig& c) {
  s.get_timestamp("start", c.start);
  s.get("days", c.days);
  s.get("seed", c.seed);
  s.get("p_it_mean", c.p_it_mean);
  s.get("diurnal_amplitude", c.diurnal_amplitude);
  s.get("weekly_dip", c.weekly_dip);
  s.get("workload_amplitude", c.workload_amplitude);
  s.get("p_it_jitter", c.p_it_jitter);
  s.get("p_it_min", c.p_it_min);
  s.get("p_it_max", c.p_it_max);
  s.get("flow_base", c.flow_base);
  s.get("flow_per_mw", c.flow_per_mw);
  s.get("flow_share", c.flow_share);
  s.get("heat_share", c.heat_share);
  s.get("heat_fraction", c.heat_fraction);
  s.get("t_sup_mean", c.t_sup_mean);
  s.get("t_sup_seasonal_amplitude", c.t_sup_seasonal_amplitude);
  s.get("t_sup_daily_amplitude", c.t_sup_daily_amplitude);
  s.get("t_sup_jitter", c.t_sup_jitter);
  read_law(s.sub("law"), c.law);
  if (s.has("maintenance")) {
    c.maintenance.clear();
    const auto& arr = s.raw("maintenance");
    if (!arr.is_array()) throw Error(ErrorCode::InvalidConfig, "synth.maintenance must be an array");
    for (const auto& item : arr) {
      Section m(item, "synth.maintenance[]");
      MaintenanceWindow w;
      m.get_timestamp("start", w.start);
      m.get("hours", w.hours);
      m.get("p_it_level", w.p_it_level);
      m.finish();
      c.maintenance.push_back(w);
    }
  }
  if (s.has("episodes")) {
    c.episodes.clear();
    const auto& arr = s.raw("episodes");
    if (!arr.is_array()) throw Error(ErrorCode::InvalidConfig, "synth.episodes must be an array");
    for (const auto& item : arr) {
      Section e(item, "synth.episodes[]");
      InefficiencyEpisode ep;
      e.get_timestamp("start", ep.start);
      e.get("hours", ep.hours);
      e.get("flow_multiplier", ep.flow_multiplier);
      e.finish();
      c.episodes.push_back(ep);
    }
  }
  s.finish();
}

void read_tariff(Section s, TariffSchedule& t) {
  std::string kind = t.kind == TariffSchedule::Kind::Flat ? "flat" : "time_of_use";
  s.get("kind", kind);
  if (kind == "flat") t.kind = TariffSchedule::Kind::Flat;
  else if (kind == "time_of_use" || kind == "tou") t.kind = TariffSchedule::Kind::TimeOfUse;
  else throw Error(ErrorCode::InvalidConfig, "tariff.kind must be 'flat' or 'time_of_use'");
  s.get("flat_price", t.flat_price);
  s.get_optional("demand_rate", t.demand_rate);
  if (s.has("tou_periods")) {
    t.tou_periods.clear();
    const auto& arr = s.raw("tou_periods");
    if (!arr.is_array()) throw Error(ErrorCode::InvalidConfig, "tariff.tou_periods must be an array");
    for (const auto& item : arr) {
      Section p(item, "tariff.tou_periods[]");
      TouPeriod tp;
      p.get("start_hour", tp.start_hour);
      p.get("end_hour", tp.end_hour);
      p.get("weekdays", tp.weekdays);
      p.get("price", tp.price);
      p.finish();
      t.tou_periods.push_back(tp);
    }
  }
  s.finish();
}

void read_schema(Section s, TelemetrySchema& schema) {
  s.get("timestamp", schema.timestamp);
  s.get("p_it", schema.p_it);
  s.get("t_sup", schema.t_sup);
  s.get("t_ret", schema.t_ret);
  s.get("q", schema.q);
  s.get("p_acc", schema.p_acc);
  s.get("p_total", schema.p_total);
  s.get("pue", schema.pue);
  s.get("waste_heat", schema.waste_heat);
  std::string unit = "L/s";
  if (schema.flow_unit == FlowUnit::CubicMetersPerHour) unit = "m3/h";
  if (schema.flow_unit == FlowUnit::GallonsPerMinute) unit = "GPM";
  s.get("flow_unit", unit);
  const auto parsed = parse_flow_unit(unit);
  if (!parsed) throw Error(ErrorCode::InvalidConfig, "schema.flow_unit '" + unit + "' is not L/s, m3/h or GPM");
  schema.flow_unit = *parsed;
  s.finish();
}

std::string flow_unit_name(FlowUnit u) {
  switch (u) {
    case FlowUnit::LitersPerSecond: return "L/s";
    case FlowUnit::CubicMetersPerHour: return "m3/h";
    case FlowUnit::GallonsPerMinute: return "GPM";
  }
  return "L/s";
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(j, "");

  auto paths = root.sub("paths");
  paths.get_path("input", c.paths.input);
  paths.get_path("model", c.paths.model);
  paths.get_path("excess", c.paths.excess);
  paths.get_path("ledger", c.paths.ledger);
  paths.get_path("output_dir", c.paths.output_dir);
  paths.finish();

  read_schema(root.sub("schema"), c.schema);

  auto f = root.sub("features");
  auto& fc = c.surrogate.features;
  f.get("lags", fc.lags);
  f.get("windows", fc.windows);
  f.get("low_load_threshold", fc.low_load_threshold);
  f.get("c_w", fc.c_w);
  f.get("regime_one_hot", fc.regime_one_hot);
  f.finish();

  auto t = root.sub("train");
  auto& tc = c.surrogate.train;
  t.get("learning_rate", tc.learning_rate);
  t.get("max_leaves", tc.max_leaves);
  t.get("max_trees", tc.max_trees);
  t.get("early_stopping_rounds", tc.early_stopping_rounds);
  t.get("min_samples_leaf", tc.min_samples_leaf);
  t.get("histogram_bins", tc.histogram_bins);
  t.get("validation_fraction", tc.validation_fraction);
  t.get("seed", tc.seed);
  t.get("exact_splits", tc.exact_splits);
  t.get("min_split_gain", tc.min_split_gain);
  t.finish();

  auto sp = root.sub("split");
  sp.get("test_fraction", c.surrogate.test_fraction);
  sp.get("split_seed", c.surrogate.split_seed);
  sp.get("regime_seed", c.surrogate.regime_seed);
  sp.get("min_trainable_rows", c.surrogate.min_trainable_rows);
  sp.finish();

  auto g = root.sub("guardrails");
  auto& gc = c.counterfactual.guardrails;
  g.get("alpha", gc.alpha);
  g.get("delta_t_min", gc.delta_t_min);
  g.get_optional("t_sup_max", gc.t_sup_max);
  g.get("flow_floor", gc.flow_floor);
  g.finish();

  auto a = root.sub("actions");
  auto& ac = c.counterfactual.grid;
  a.get("d_tsup", ac.d_tsup);
  a.get("s_dom", ac.s_dom);
  a.get("s_non", ac.s_non);
  a.get("independent_non_dominant", ac.independent_non_dominant);
  a.get("skip_infeasible_predictions", c.counterfactual.skip_infeasible_predictions);
  a.finish();

  read_tariff(root.sub("tariff"), c.tariff);

  auto r = root.sub("review");
  r.get("s_min", c.review.s_min);
  r.get("hysteresis_idle_steps", c.review.hysteresis_idle_steps);
  r.get("ramp_tsup_limit", c.review.ramp_tsup_limit);
  r.get("reject_out_of_distribution", c.review.reject_out_of_distribution);
  r.finish();

  read_synth(root.sub("synth"), c.synth);
  root.get_optional("threads", c.threads);
  root.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& c) {
  json j;
  j["paths"] = {{"input", c.paths.input.string()},
                {"model", c.paths.model.string()},
                {"excess", c.paths.excess.string()},
                {"ledger", c.paths.ledger.string()},
                {"output_dir", c.paths.output_dir.string()}};
  const auto& s = c.schema;
  j["schema"] = {{"timestamp", s.timestamp}, {"p_it", s.p_it},       {"t_sup", s.t_sup},
                 {"t_ret", s.t_ret},         {"q", s.q},             {"p_acc", s.p_acc},
                 {"p_total", s.p_total},     {"pue", s.pue},         {"waste_heat", s.waste_heat},
                 {"flow_unit", flow_unit_name(s.flow_unit)}};
  const auto& fc = c.surrogate.features;
  j["features"] = {{"lags", fc.lags},
                   {"windows", fc.windows},
                   {"low_load_threshold", fc.low_load_threshold},
                   {"c_w", fc.c_w},
                   {"regime_one_hot", fc.regime_one_hot}};
  const auto& tc = c.surrogate.train;
  j["train"] = {{"learning_rate", tc.learning_rate},
                {"max_leaves", tc.max_leaves},
                {"max_trees", tc.max_trees},
                {"early_stopping_rounds", tc.early_stopping_rounds},
                {"min_samples_leaf", tc.min_samples_leaf},
                {"histogram_bins", tc.histogram_bins},
                {"validation_fraction", tc.validation_fraction},
                {"seed", tc.seed},
                {"exact_splits", tc.exact_splits},
                {"min_split_gain", tc.min_split_gain}};
  j["split"] = {{"test_fraction", c.surrogate.test_fraction},
                {"split_seed", c.surrogate.split_seed},
                {"regime_seed", c.surrogate.regime_seed},
                {"min_trainable_rows", c.surrogate.min_trainable_rows}};
  const auto& gc = c.counterfactual.guardrails;
  j["guardrails"] = {{"alpha", gc.alpha},
                     {"delta_t_min", gc.delta_t_min},
                     {"t_sup_max", optional_json(gc.t_sup_max)},
                     {"flow_floor", gc.flow_floor}};
  const auto& ac = c.counterfactual.grid;
  j["actions"] = {{"d_tsup", ac.d_tsup},
                  {"s_dom", ac.s_dom},
                  {"s_non", ac.s_non},
                  {"independent_non_dominant", ac.independent_non_dominant},
                  {"skip_infeasible_predictions", c.counterfactual.skip_infeasible_predictions}};
  json periods = json::array();
  for (const auto& p : c.tariff.tou_periods)
    periods.push_back({{"start_hour", p.start_hour}, {"end_hour", p.end_hour}, {"weekdays", p.weekdays}, {"price", p.price}});
  j["tariff"] = {{"kind", c.tariff.kind == TariffSchedule::Kind::Flat ? "flat" : "time_of_use"},
                 {"flat_price", c.tariff.flat_price},
                 {"tou_periods", periods},
                 {"demand_rate", optional_json(c.tariff.demand_rate)}};
  j["review"] = {{"s_min", c.review.s_min},
                 {"hysteresis_idle_steps", c.review.hysteresis_idle_steps},
                 {"ramp_tsup_limit", c.review.ramp_tsup_limit},
                 {"reject_out_of_distribution", c.review.reject_out_of_distribution}};
  const auto& sc = c.synth;
  json maintenance = json::array();
  for (const auto& m : sc.maintenance)
    maintenance.push_back({{"start", format_timestamp(m.start)}, {"hours", m.hours}, {"p_it_level", m.p_it_level}});
  json episodes = json::array();
  for (const auto& e : sc.episodes)
    episodes.push_back({{"start", format_timestamp(e.start)}, {"hours", e.hours}, {"flow_multiplier", e.flow_multiplier}});
  j["synth"] = {{"start", format_timestamp(sc.start)},
                {"days", sc.days},
                {"seed", sc.seed},
                {"p_it_mean", sc.p_it_mean},
                {"diurnal_amplitude", sc.diurnal_amplitude},
                {"weekly_dip", sc.weekly_dip},
                {"workload_amplitude", sc.workload_amplitude},
                {"p_it_jitter", sc.p_it_jitter},
                {"p_it_min", sc.p_it_min},
                {"p_it_max", sc.p_it_max},
                {"flow_base", sc.flow_base},
                {"flow_per_mw", sc.flow_per_mw},
                {"flow_share", sc.flow_share},
                {"heat_share", sc.heat_share},
                {"heat_fraction", sc.heat_fraction},
                {"t_sup_mean", sc.t_sup_mean},
                {"t_sup_seasonal_amplitude", sc.t_sup_seasonal_amplitude},
                {"t_sup_daily_amplitude", sc.t_sup_daily_amplitude},
                {"t_sup_jitter", sc.t_sup_jitter},
                {"law",
                 {{"k_p", sc.law.k_p},
                  {"base", sc.law.base},
                  {"k_h", sc.law.k_h},
                  {"k_t", sc.law.k_t},
                  {"t_ref", sc.law.t_ref},
                  {"sigma", sc.law.sigma},
                  {"floor_fraction", sc.law.floor_fraction}}},
                {"maintenance", maintenance},
                {"episodes", episodes}};
  j["threads"] = optional_json(c.threads);
  return j.dump(2) + "\n";
}

}  // namespace coolopt

#include "coolopt/physics_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "coolopt/csv.hpp"
#include "coolopt/error.hpp"

namespace coolopt {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kHistorySources[] = {"p_it", "q_tot", "t_sup"};

std::string loop_name(const char* base, int i) { return std::string(base) + "_" + std::to_string(i + 1); }

std::size_t must(const FeatureSchema& schema, const std::string& name) {
  if (auto i = schema.index_of(name)) return *i;
  throw Error(ErrorCode::SchemaMismatch, "schema lacks feature " + name);
}

}  // namespace

double loop_lift(double t_ret, double t_sup) { return t_ret - t_sup; }

double loop_heat(double q, double delta_t, double c_w) { return c_w * q * delta_t; }

double imbalance_index(const std::array<double, kLoopCount>& q_heat) {
  double total = 0.0, top = 0.0;
  for (double h : q_heat) {
    const double pos = std::max(h, 0.0);
    total += pos;
    top = std::max(top, pos);
  }
  return total > 0.0 ? top / total : 0.0;
}

int dominant_loop(const std::array<double, kLoopCount>& q_heat) {
  int best = 0;
  for (int i = 1; i < kLoopCount; ++i)
    if (q_heat[i] > q_heat[best]) best = i;
  return best;
}

PhysicsState compute_physics(double p_it, double t_sup, const std::array<double, kLoopCount>& t_ret,
                             const std::array<double, kLoopCount>& q, double c_w,
                             std::optional<double> lift_floor) {
  PhysicsState s;
  double lift_sum = 0.0;
  for (int i = 0; i < kLoopCount; ++i) {
    double lift = loop_lift(t_ret[i], t_sup);
    if (lift_floor) lift = std::max(lift, *lift_floor);
    s.delta_t[i] = lift;
    s.q_heat[i] = loop_heat(q[i], lift, c_w);
    lift_sum += lift;
  }
  s.q_tot = q[0] + q[1] + q[2];
  s.q_tot_heat = s.q_heat[0] + s.q_heat[1] + s.q_heat[2];
  s.q_tot_cubed = s.q_tot * s.q_tot * s.q_tot;
  s.imbalance = imbalance_index(s.q_heat);
  s.mean_delta_t = lift_sum / kLoopCount;
  s.interact_pit_tsup = p_it * t_sup;
  s.interact_qtot_dt = s.q_tot * s.mean_delta_t;
  return s;
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

FeatureSchema make_feature_schema(const FeatureConfig& cfg) {
  FeatureSchema s;
  auto add = [&](std::string name, int mono, std::string unit) {
    s.names.push_back(std::move(name));
    s.monotone.push_back(mono);
    s.units.push_back(std::move(unit));
  };
  add("p_it", +1, "MW");
  add("t_sup", 0, "degC");
  for (int i = 0; i < kLoopCount; ++i) add(loop_name("t_ret", i), 0, "degC");
  for (int i = 0; i < kLoopCount; ++i) add(loop_name("q", i), 0, "L/s");
  for (int i = 0; i < kLoopCount; ++i) add(loop_name("delta_t", i), 0, "K");
  for (int i = 0; i < kLoopCount; ++i) add(loop_name("q_heat", i), 0, "MW");
  add("q_tot", +1, "L/s");
  add("q_tot_heat", +1, "MW");
  add("q_tot_cubed", 0, "(L/s)^3");
  add("imbalance", 0, "1");
  add("mean_delta_t", 0, "K");
  add("interact_pit_tsup", 0, "MW*degC");
  add("interact_qtot_dt", 0, "L/s*K");
  add("hour", 0, "h");
  add("month", 0, "1");
  add("low_load", 0, "bool");

  const char* units[] = {"MW", "L/s", "degC"};
  for (int src = 0; src < 3; ++src)
    for (int lag : cfg.lags)
      add(std::string(kHistorySources[src]) + "_lag" + std::to_string(lag), 0, units[src]);
  for (int src = 0; src < 3; ++src)
    for (int w : cfg.windows)
      add(std::string(kHistorySources[src]) + "_roll" + std::to_string(w), src < 2 ? +1 : 0,
          units[src]);

  if (cfg.regime_one_hot) {
    for (int k = 0; k < 3; ++k) add("regime_" + std::to_string(k), 0, "bool");
  } else {
    add("regime", 0, "id");
  }
  return s;
}

FeatureLayout FeatureLayout::resolve(const FeatureSchema& schema) {
  FeatureLayout l{};
  l.p_it = must(schema, "p_it");
  l.t_sup = must(schema, "t_sup");
  for (int i = 0; i < kLoopCount; ++i) {
    l.t_ret[i] = must(schema, loop_name("t_ret", i));
    l.q[i] = must(schema, loop_name("q", i));
    l.delta_t[i] = must(schema, loop_name("delta_t", i));
    l.q_heat[i] = must(schema, loop_name("q_heat", i));
  }
  l.q_tot = must(schema, "q_tot");
  l.q_tot_heat = must(schema, "q_tot_heat");
  l.q_tot_cubed = must(schema, "q_tot_cubed");
  l.imbalance = must(schema, "imbalance");
  l.mean_delta_t = must(schema, "mean_delta_t");
  l.interact_pit_tsup = must(schema, "interact_pit_tsup");
  l.interact_qtot_dt = must(schema, "interact_qtot_dt");
  l.hour = must(schema, "hour");
  l.month = must(schema, "month");
  l.low_load = must(schema, "low_load");
  if (auto r = schema.index_of("regime")) {
    l.regime = {*r};
  } else {
    for (int k = 0; k < 3; ++k) l.regime.push_back(must(schema, "regime_" + std::to_string(k)));
  }
  return l;
}

void write_physics(std::span<double> row, const FeatureLayout& l, const PhysicsState& s) {
  for (int i = 0; i < kLoopCount; ++i) {
    row[l.delta_t[i]] = s.delta_t[i];
    row[l.q_heat[i]] = s.q_heat[i];
  }
  row[l.q_tot] = s.q_tot;
  row[l.q_tot_heat] = s.q_tot_heat;
  row[l.q_tot_cubed] = s.q_tot_cubed;
  row[l.imbalance] = s.imbalance;
  row[l.mean_delta_t] = s.mean_delta_t;
  row[l.interact_pit_tsup] = s.interact_pit_tsup;
  row[l.interact_qtot_dt] = s.interact_qtot_dt;
}

void write_regime(std::span<double> row, const FeatureLayout& l, int regime) {
  if (l.regime.size() == 1) {
    row[l.regime[0]] = regime;
  } else {
    for (std::size_t k = 0; k < l.regime.size(); ++k)
      row[l.regime[k]] = static_cast<int>(k) == regime ? 1.0 : 0.0;
  }
}

HistoryFeatures history_features(std::span<const double> values,
                                 std::span<const std::int64_t> slots,
                                 std::span<const int> lags, std::span<const int> windows) {
  const std::size_t n = values.size();
  HistoryFeatures h;
  h.lagged.assign(lags.size(), std::vector<double>(n, kNaN));
  h.rolling.assign(windows.size(), std::vector<double>(n, kNaN));
  h.lag1_present.assign(n, false);

  std::unordered_map<std::int64_t, std::size_t> by_slot;
  by_slot.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) by_slot.emplace(slots[i], i);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < lags.size(); ++k) {
      auto it = by_slot.find(slots[i] - lags[k]);
      if (it != by_slot.end()) h.lagged[k][i] = values[it->second];
    }
    if (auto it = by_slot.find(slots[i] - 1); it != by_slot.end()) h.lag1_present[i] = true;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      // Rows are time-ordered, so the window is the run of preceding rows whose
      // slot lies in (t - w, t].
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t j = i + 1; j-- > 0;) {
        if (slots[j] <= slots[i] - windows[k]) break;
        sum += values[j];
        ++count;
      }
      h.rolling[k][i] = sum / static_cast<double>(count);
    }
  }
  return h;
}

HistoryFeatures history_features(std::span<const double> values, std::span<const int> lags,
                                 std::span<const int> windows) {
  std::vector<std::int64_t> slots(values.size());
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = static_cast<std::int64_t>(i);
  return history_features(values, slots, lags, windows);
}

FeatureMatrix build_feature_matrix(const CleanDataset& dataset, const FeatureSchema& schema,
                                   const FeatureConfig& cfg) {
  if (!(schema == make_feature_schema(cfg)))
    throw Error(ErrorCode::SchemaMismatch, "feature schema does not match feature config");
  const auto layout = FeatureLayout::resolve(schema);
  const auto& recs = dataset.records;
  const std::size_t n = recs.size();

  FeatureMatrix m;
  m.rows = n;
  m.cols = schema.size();
  m.values.assign(n * m.cols, kNaN);
  m.trainable.assign(n, false);

  std::vector<std::int64_t> slots(n);
  std::vector<double> p_it(n), q_tot(n), t_sup(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = recs[i];
    slots[i] = slot_index(r.timestamp);
    p_it[i] = r.p_it;
    q_tot[i] = r.q[0] + r.q[1] + r.q[2];
    t_sup[i] = r.t_sup;
  }
  const std::vector<double>* sources[] = {&p_it, &q_tot, &t_sup};
  std::vector<HistoryFeatures> hist;
  for (const auto* src : sources) hist.push_back(history_features(*src, slots, cfg.lags, cfg.windows));

  std::vector<std::size_t> lag_cols, roll_cols;
  for (int src = 0; src < 3; ++src)
    for (int lag : cfg.lags)
      lag_cols.push_back(
          must(schema, std::string(kHistorySources[src]) + "_lag" + std::to_string(lag)));
  for (int src = 0; src < 3; ++src)
    for (int w : cfg.windows)
      roll_cols.push_back(
          must(schema, std::string(kHistorySources[src]) + "_roll" + std::to_string(w)));

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = recs[i];
    auto row = m.row(i);
    row[layout.p_it] = r.p_it;
    row[layout.t_sup] = r.t_sup;
    for (int k = 0; k < kLoopCount; ++k) {
      row[layout.t_ret[k]] = r.t_ret[k];
      row[layout.q[k]] = r.q[k];
    }
    write_physics(row, layout, compute_physics(r.p_it, r.t_sup, r.t_ret, r.q, cfg.c_w));
    const auto cal = derive_calendar(r, cfg.low_load_threshold);
    row[layout.hour] = cal.hour;
    row[layout.month] = cal.month;
    row[layout.low_load] = cal.low_load_flag ? 1.0 : 0.0;

    std::size_t lc = 0;
    for (int src = 0; src < 3; ++src) {
      for (std::size_t k = 0; k < cfg.lags.size(); ++k) row[lag_cols[lc++]] = hist[src].lagged[k][i];
      for (std::size_t k = 0; k < cfg.windows.size(); ++k)
        row[roll_cols[src * cfg.windows.size() + k]] = hist[src].rolling[k][i];
    }
    m.trainable[i] = hist[0].lag1_present[i];
  }
  return m;
}

void write_feature_matrix_csv(const std::filesystem::path& path, const FeatureMatrix& matrix,
                              const FeatureSchema& schema, const CleanDataset& dataset) {
  csv::Writer w(path);
  std::vector<std::string> header{"timestamp"};
  header.insert(header.end(), schema.names.begin(), schema.names.end());
  header.push_back("trainable");
  w.row(header);
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    std::vector<std::string> fields{format_timestamp(dataset.records[i].timestamp)};
    for (double v : matrix.row(i)) fields.push_back(csv::format_double(v));
    fields.push_back(matrix.trainable[i] ? "1" : "0");
    w.row(fields);
  }
  w.close();
}

}  // namespace coolopt

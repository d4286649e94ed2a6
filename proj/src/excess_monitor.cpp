#include "coolopt/excess_monitor.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "coolopt/csv.hpp"
#include "coolopt/error.hpp"
#include "coolopt/surrogate.hpp"

namespace coolopt {

namespace {

using namespace std::chrono;

year_month_day civil(Timestamp ts) { return year_month_day{floor<days>(ts)}; }

int week_hour(Timestamp ts) {
  const auto dp = floor<days>(ts);
  const int wd = static_cast<int>(weekday{dp}.c_encoding());
  const int hour = static_cast<int>(duration_cast<hours>(ts - dp).count());
  return wd * 24 + hour;
}

}  // namespace

void TariffSchedule::validate() const {
  if (demand_rate && !(*demand_rate >= 0.0))
    throw Error(ErrorCode::InvalidConfig, "demand rate must be >= 0");
  if (kind == Kind::Flat) {
    if (!(flat_price >= 0.0)) throw Error(ErrorCode::InvalidConfig, "flat price must be >= 0");
    return;
  }
  std::array<int, 168> cover{};
  for (const auto& p : tou_periods) {
    if (!(p.price >= 0.0)) throw Error(ErrorCode::InvalidConfig, "TOU price must be >= 0");
    if (p.start_hour < 0 || p.end_hour > 24 || p.start_hour >= p.end_hour)
      throw Error(ErrorCode::InvalidConfig,
                  fmt::format("TOU hour range [{}, {}) is invalid", p.start_hour, p.end_hour));
    for (int wd : p.weekdays) {
      if (wd < 0 || wd > 6) throw Error(ErrorCode::InvalidConfig, fmt::format("weekday {} out of range", wd));
      for (int h = p.start_hour; h < p.end_hour; ++h) ++cover[wd * 24 + h];
    }
  }
  for (int i = 0; i < 168; ++i)
    if (cover[i] != 1)
      throw Error(ErrorCode::TariffGap, fmt::format("weekday {} hour {} covered {} times", i / 24,
                                                    i % 24, cover[i]));
}

double TariffSchedule::price_at(Timestamp ts) const {
  if (kind == Kind::Flat) return flat_price;
  const int wh = week_hour(ts);
  const int wd = wh / 24, hour = wh % 24;
  for (const auto& p : tou_periods)
    if (hour >= p.start_hour && hour < p.end_hour &&
        std::find(p.weekdays.begin(), p.weekdays.end(), wd) != p.weekdays.end())
      return p.price;
  throw Error(ErrorCode::TariffGap, "no tariff period covers " + format_timestamp(ts));
}

TariffSchedule TariffSchedule::scaled(double factor) const {
  TariffSchedule t = *this;
  t.flat_price *= factor;
  for (auto& p : t.tou_periods) p.price *= factor;
  if (t.demand_rate) *t.demand_rate *= factor;
  return t;
}

double excess_power(double p_acc_actual, double p_acc_hat) {
  return std::max(p_acc_actual - p_acc_hat, 0.0);
}

double excess_energy(double p_excess) { return p_excess * kStepHours; }

double excess_cost(double e_excess, const TariffSchedule& tariff, Timestamp ts) {
  return e_excess * 1000.0 * tariff.price_at(ts);
}

double ExcessSeries::total_energy() const {
  double s = 0.0;
  for (const auto& iv : intervals) s += iv.e_excess;
  return s;
}

double ExcessSeries::total_cost() const {
  double s = 0.0;
  for (const auto& iv : intervals) s += iv.c_excess;
  return s;
}

ExcessSeries compute_excess(const std::vector<TelemetryRecord>& records,
                            std::span<const double> p_acc_hat, std::span<const int> regimes,
                            const TariffSchedule& tariff, double low_load_threshold) {
  if (p_acc_hat.size() != records.size() || regimes.size() != records.size())
    throw Error(ErrorCode::LengthMismatch, "excess inputs differ in length");
  tariff.validate();
  ExcessSeries out;
  out.intervals.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto& iv = out.intervals[i];
    iv.timestamp = r.timestamp;
    iv.p_acc_actual = r.p_acc;
    iv.p_acc_hat = p_acc_hat[i];
    iv.p_excess = excess_power(r.p_acc, p_acc_hat[i]);
    iv.e_excess = excess_energy(iv.p_excess);
    iv.c_excess = excess_cost(iv.e_excess, tariff, r.timestamp);
    iv.regime = regimes[i];
    iv.calendar = derive_calendar(r, low_load_threshold);
  }
  return out;
}

ExcessSeries compute_excess(const CleanDataset& dataset, const SurrogateModel& model,
                            const TariffSchedule& tariff) {
  const auto X = surrogate_features(model, dataset);
  const auto layout = FeatureLayout::resolve(model.schema);
  std::vector<double> hat(X.rows);
  std::vector<int> regimes(X.rows);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, X.rows, 512),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (auto i = r.begin(); i != r.end(); ++i) {
                        const auto row = X.row(i);
                        hat[i] = predict_accessory_power(model, row);
                        regimes[i] = assign_regime(model.regimes, row[layout.q_tot], row[layout.t_sup]);
                      }
                    });
  return compute_excess(dataset.records, hat, regimes, tariff, model.feature_config.low_load_threshold);
}

DemandCharge demand_charge(const ExcessSeries& series, double rate) {
  if (!(rate >= 0.0)) throw Error(ErrorCode::InvalidConfig, "demand rate must be >= 0");
  std::map<std::pair<int, int>, double> peaks;
  for (const auto& iv : series.intervals) {
    const auto ymd = civil(iv.timestamp);
    auto& peak = peaks[{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month()))}];
    peak = std::max(peak, iv.p_excess);
  }
  DemandCharge d;
  for (const auto& [ym, peak] : peaks) {
    d.months.push_back({ym.first, ym.second, peak, rate * peak});
    d.total += rate * peak;
  }
  return d;
}

double ExcessViews::hour_month_mean(int hour, int month) const {
  const auto n = hour_month_count[hour][month - 1];
  return n ? hour_month_sum[hour][month - 1] / static_cast<double>(n) : 0.0;
}

double ExcessViews::hour_month_total() const {
  double s = 0.0;
  for (const auto& row : hour_month_sum)
    for (double v : row) s += v;
  return s;
}

ExcessViews aggregate_views(const ExcessSeries& series) {
  if (series.intervals.empty()) throw Error(ErrorCode::DegenerateData, "excess series is empty");
  std::map<std::string, PeriodTotal> daily, monthly;
  std::map<int, PeriodTotal> regime, weekday;
  ExcessViews v;
  auto add = [](PeriodTotal& t, const ExcessInterval& iv) {
    t.energy += iv.e_excess;
    t.cost += iv.c_excess;
    ++t.intervals;
  };
  for (const auto& iv : series.intervals) {
    const auto ymd = civil(iv.timestamp);
    const int y = static_cast<int>(ymd.year());
    const unsigned m = static_cast<unsigned>(ymd.month());
    const unsigned d = static_cast<unsigned>(ymd.day());
    add(daily[fmt::format("{:04}-{:02}-{:02}", y, m, d)], iv);
    add(monthly[fmt::format("{:04}-{:02}", y, m)], iv);
    add(regime[iv.regime], iv);
    add(weekday[iv.calendar.weekday], iv);
    v.hour_month_sum[iv.calendar.hour][m - 1] += iv.e_excess;
    ++v.hour_month_count[iv.calendar.hour][m - 1];
  }
  for (auto& [k, t] : daily) v.daily.push_back(std::move(t)), v.daily.back().key = k;
  for (auto& [k, t] : monthly) v.monthly.push_back(std::move(t)), v.monthly.back().key = k;
  for (auto& [k, t] : regime) v.regime.push_back(std::move(t)), v.regime.back().key = std::to_string(k);
  for (auto& [k, t] : weekday) v.weekday.push_back(std::move(t)), v.weekday.back().key = std::to_string(k);
  return v;
}

void write_excess_csv(const std::filesystem::path& path, const ExcessSeries& series) {
  csv::Writer w(path);
  w.row({"timestamp", "p_acc", "p_acc_hat", "p_excess", "e_excess", "c_excess", "regime"});
  for (const auto& iv : series.intervals)
    w.row({format_timestamp(iv.timestamp), csv::format_double(iv.p_acc_actual),
           csv::format_double(iv.p_acc_hat), csv::format_double(iv.p_excess),
           csv::format_double(iv.e_excess), csv::format_double(iv.c_excess), std::to_string(iv.regime)});
  w.close();
}

ExcessSeries read_excess_csv(const std::filesystem::path& path) {
  const auto table = csv::read_table(path);
  const std::array<const char*, 7> names{"timestamp", "p_acc", "p_acc_hat", "p_excess",
                                         "e_excess", "c_excess", "regime"};
  std::array<std::size_t, 7> col{};
  for (std::size_t k = 0; k < names.size(); ++k) col[k] = table.require_column(names[k]);
  ExcessSeries out;
  out.intervals.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto fail = [&](const char* what) {
      return Error(ErrorCode::RowParseError,
                   fmt::format("{}:{}: bad {}", path.string(), table.line_numbers[r], what));
    };
    auto num = [&](std::size_t k) {
      if (col[k] >= row.size()) throw fail(names[k]);
      auto v = csv::parse_double(row[col[k]]);
      if (!v) throw fail(names[k]);
      return *v;
    };
    if (col[0] >= row.size()) throw fail("timestamp");
    const auto ts = parse_timestamp(row[col[0]]);
    if (!ts) throw fail("timestamp");
    ExcessInterval iv;
    iv.timestamp = *ts;
    iv.p_acc_actual = num(1);
    iv.p_acc_hat = num(2);
    iv.p_excess = num(3);
    iv.e_excess = num(4);
    iv.c_excess = num(5);
    iv.regime = static_cast<int>(num(6));
    iv.calendar = derive_calendar(*ts, 0.0, 0.0);
    out.intervals.push_back(iv);
  }
  return out;
}

void write_period_csv(const std::filesystem::path& path, const std::vector<PeriodTotal>& rows,
                      const char* key_name) {
  csv::Writer w(path);
  w.row({key_name, "e_excess_MWh", "c_excess_usd", "intervals", "mean_e_excess_MWh"});
  for (const auto& r : rows)
    w.row({r.key, csv::format_double(r.energy), csv::format_double(r.cost),
           std::to_string(r.intervals), csv::format_double(r.mean_energy())});
  w.close();
}

void write_hour_month_csv(const std::filesystem::path& path, const ExcessViews& views) {
  csv::Writer w(path);
  std::vector<std::string> header{"hour"};
  for (int m = 1; m <= 12; ++m) header.push_back(fmt::format("m{:02}", m));
  w.row(header);
  for (int h = 0; h < 24; ++h) {
    std::vector<std::string> row{std::to_string(h)};
    for (int m = 1; m <= 12; ++m) row.push_back(csv::format_double(views.hour_month_mean(h, m)));
    w.row(row);
  }
  w.close();
}

void write_demand_csv(const std::filesystem::path& path, const DemandCharge& demand) {
  csv::Writer w(path);
  w.row({"month", "peak_excess_MW", "demand_charge_usd"});
  for (const auto& m : demand.months)
    w.row({fmt::format("{:04}-{:02}", m.year, m.month), csv::format_double(m.peak_excess),
           csv::format_double(m.charge)});
  w.row({"total", "", csv::format_double(demand.total)});
  w.close();
}

}  // namespace coolopt

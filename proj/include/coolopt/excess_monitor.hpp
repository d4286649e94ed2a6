#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "coolopt/telemetry.hpp"

namespace coolopt {

struct SurrogateModel;

inline constexpr double kStepHours = 1.0 / 6.0;

/// Prices applying to hours [start_hour, end_hour) on the listed weekdays
/// (0 = Sunday).
struct TouPeriod {
  int start_hour = 0;
  int end_hour = 24;
  std::vector<int> weekdays{0, 1, 2, 3, 4, 5, 6};
  double price = 0.0;  // $/kWh
};

struct TariffSchedule {
  enum class Kind { Flat, TimeOfUse };

  Kind kind = Kind::Flat;
  double flat_price = 0.06;  // $/kWh
  std::vector<TouPeriod> tou_periods;
  std::optional<double> demand_rate;  // $/MW-month

  /// Negative prices or rates raise InvalidConfig; TOU periods that miss or
  /// double-cover a week-hour raise TariffGap.
  void validate() const;

  /// Price at the start of the interval. Throws TariffGap for an uncovered hour.
  double price_at(Timestamp ts) const;

  /// Every price and the demand rate multiplied by `factor`.
  TariffSchedule scaled(double factor) const;
};

double excess_power(double p_acc_actual, double p_acc_hat);
double excess_energy(double p_excess);
double excess_cost(double e_excess, const TariffSchedule& tariff, Timestamp ts);

struct ExcessInterval {
  Timestamp timestamp{};
  double p_acc_actual = 0.0;
  double p_acc_hat = 0.0;
  double p_excess = 0.0;  // MW
  double e_excess = 0.0;  // MWh
  double c_excess = 0.0;  // $
  int regime = 0;
  CalendarContext calendar;
};

struct ExcessSeries {
  std::vector<ExcessInterval> intervals;

  double total_energy() const;
  double total_cost() const;
};

/// Pure form: actual and predicted accessory power plus regimes per record.
ExcessSeries compute_excess(const std::vector<TelemetryRecord>& records,
                            std::span<const double> p_acc_hat, std::span<const int> regimes,
                            const TariffSchedule& tariff, double low_load_threshold);

/// Runs the surrogate over the dataset and derives the series.
ExcessSeries compute_excess(const CleanDataset& dataset, const SurrogateModel& model,
                            const TariffSchedule& tariff);

struct MonthlyDemand {
  int year = 0;
  int month = 1;
  double peak_excess = 0.0;  // MW
  double charge = 0.0;       // $
};

struct DemandCharge {
  std::vector<MonthlyDemand> months;
  double total = 0.0;
};

DemandCharge demand_charge(const ExcessSeries& series, double rate);

struct PeriodTotal {
  std::string key;  // "YYYY-MM-DD", "YYYY-MM", regime id, or weekday number
  double energy = 0.0;
  double cost = 0.0;
  std::size_t intervals = 0;

  double mean_energy() const { return intervals ? energy / static_cast<double>(intervals) : 0.0; }
};

struct ExcessViews {
  std::vector<PeriodTotal> daily;
  std::vector<PeriodTotal> monthly;
  std::vector<PeriodTotal> regime;
  std::vector<PeriodTotal> weekday;
  // [hour][month - 1]
  std::array<std::array<double, 12>, 24> hour_month_sum{};
  std::array<std::array<std::size_t, 12>, 24> hour_month_count{};

  double hour_month_mean(int hour, int month) const;
  double hour_month_total() const;
};

/// Throws DegenerateData for an empty series.
ExcessViews aggregate_views(const ExcessSeries& series);

void write_excess_csv(const std::filesystem::path& path, const ExcessSeries& series);
/// Reads an interval CSV written by write_excess_csv. Calendar fields are
/// rebuilt from the timestamp; the low-load flag is not stored and reads false.
ExcessSeries read_excess_csv(const std::filesystem::path& path);
void write_period_csv(const std::filesystem::path& path, const std::vector<PeriodTotal>& rows,
                      const char* key_name);
/// 24 rows (hours) by 12 columns (months) of mean excess MWh per interval.
void write_hour_month_csv(const std::filesystem::path& path, const ExcessViews& views);
void write_demand_csv(const std::filesystem::path& path, const DemandCharge& demand);

}  // namespace coolopt

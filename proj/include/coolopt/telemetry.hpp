#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coolopt {

inline constexpr int kLoopCount = 3;
inline constexpr std::int64_t kStepSeconds = 600;

/// Facility-local wall-clock time, stored without a zone (no DST shifting).
using Timestamp = std::chrono::sys_seconds;

std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

/// Index of the 10-minute slot containing `ts`.
inline std::int64_t slot_index(Timestamp ts) {
  return ts.time_since_epoch().count() / kStepSeconds;
}
inline Timestamp slot_time(std::int64_t slot) {
  return Timestamp{std::chrono::seconds{slot * kStepSeconds}};
}

struct TelemetryRecord {
  Timestamp timestamp{};
  double p_it = 0.0;   // MW
  double t_sup = 0.0;  // degC
  std::array<double, kLoopCount> t_ret{};  // degC
  std::array<double, kLoopCount> q{};      // L/s
  double p_acc = 0.0;  // MW
  std::optional<double> p_total;
  std::optional<double> pue;
  std::optional<std::array<double, kLoopCount>> waste_heat;

  bool operator==(const TelemetryRecord&) const = default;
};

/// Empty when the record satisfies every record invariant, otherwise the first
/// violated rule.
std::optional<std::string> validate_record(const TelemetryRecord& r);

enum class FlowUnit { LitersPerSecond, CubicMetersPerHour, GallonsPerMinute };

std::optional<FlowUnit> parse_flow_unit(std::string_view name);
double flow_to_liters_per_second(double value, FlowUnit unit);

/// Maps record fields to CSV column names.
struct TelemetrySchema {
  std::string timestamp = "timestamp";
  std::string p_it = "p_it";
  std::string t_sup = "t_sup";
  std::array<std::string, kLoopCount> t_ret{"t_ret_1", "t_ret_2", "t_ret_3"};
  std::array<std::string, kLoopCount> q{"q_1", "q_2", "q_3"};
  std::string p_acc = "p_acc";
  std::string p_total = "p_total";
  std::string pue = "pue";
  std::array<std::string, kLoopCount> waste_heat{"waste_heat_1", "waste_heat_2", "waste_heat_3"};
  FlowUnit flow_unit = FlowUnit::LitersPerSecond;
};

struct RowReject {
  std::size_t line = 0;
  std::string column;
  std::string reason;
};

struct ParsedTelemetry {
  std::vector<TelemetryRecord> records;
  std::vector<RowReject> rejects;
  std::size_t data_rows = 0;
};

/// Reads a telemetry CSV. Rows with a blank or malformed required cell are
/// reported in `rejects`; optional cells that fail to parse are left absent.
ParsedTelemetry parse_telemetry_csv(const std::filesystem::path& path,
                                    const TelemetrySchema& schema = {});

struct CleaningEvent {
  Timestamp timestamp{};
  std::string reason;
};

struct CleanDataset {
  std::vector<TelemetryRecord> records;  // strictly increasing, on-grid
  std::vector<Timestamp> gaps;           // every missing slot between first and last
  std::vector<CleaningEvent> removed;    // duplicates and invariant violations
};

CleanDataset clean_and_order(std::vector<TelemetryRecord> records);

struct CalendarContext {
  int hour = 0;     // 0-23
  int month = 1;    // 1-12
  int weekday = 0;  // 0 = Sunday
  bool low_load_flag = false;

  bool operator==(const CalendarContext&) const = default;
};

CalendarContext derive_calendar(const TelemetryRecord& record, double low_load_threshold);
CalendarContext derive_calendar(Timestamp ts, double p_it, double low_load_threshold);

/// Calendar day of `ts` as days since epoch.
std::int64_t day_index(Timestamp ts);

void write_telemetry_csv(const std::filesystem::path& path,
                         const std::vector<TelemetryRecord>& records);
void write_rejects_csv(const std::filesystem::path& path, const std::vector<RowReject>& rejects);
void write_gap_report_csv(const std::filesystem::path& path, const CleanDataset& dataset);

}  // namespace coolopt

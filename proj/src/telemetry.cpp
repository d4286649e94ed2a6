#include "coolopt/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "coolopt/csv.hpp"
#include "coolopt/error.hpp"

namespace coolopt {
namespace {

bool read_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

// Accepts `YYYY-MM-DD[T ]HH:MM[:SS]`.
std::optional<Timestamp> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  text = csv::trim(text);
  if (text.size() != 16 && text.size() != 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':')
    return std::nullopt;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!read_int(text.substr(0, 4), y) || !read_int(text.substr(5, 2), mo) ||
      !read_int(text.substr(8, 2), d) || !read_int(text.substr(11, 2), h) ||
      !read_int(text.substr(14, 2), mi))
    return std::nullopt;
  if (text.size() == 19) {
    if (text[16] != ':' || !read_int(text.substr(17, 2), s)) return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) return std::nullopt;
  return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const hh_mm_ss<seconds> hms{ts - day};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

std::optional<std::string> validate_record(const TelemetryRecord& r) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (r.timestamp.time_since_epoch().count() % kStepSeconds != 0)
    return "timestamp not on 10-minute grid";
  if (!finite(r.p_it) || !finite(r.t_sup) || !finite(r.p_acc)) return "non-finite value";
  for (int i = 0; i < kLoopCount; ++i)
    if (!finite(r.t_ret[i]) || !finite(r.q[i])) return "non-finite value";
  if (!(r.p_it > 0.0)) return "p_it must be > 0";
  if (r.p_acc < 0.0) return "p_acc must be >= 0";
  for (double q : r.q)
    if (q < 0.0) return "flow must be >= 0";
  if (r.pue && !(*r.pue >= 1.0)) return "pue must be >= 1";
  return std::nullopt;
}

std::optional<FlowUnit> parse_flow_unit(std::string_view name) {
  if (name == "L/s" || name == "lps") return FlowUnit::LitersPerSecond;
  if (name == "m3/h" || name == "m³/h") return FlowUnit::CubicMetersPerHour;
  if (name == "GPM" || name == "gpm") return FlowUnit::GallonsPerMinute;
  return std::nullopt;
}

double flow_to_liters_per_second(double value, FlowUnit unit) {
  switch (unit) {
    case FlowUnit::LitersPerSecond: return value;
    case FlowUnit::CubicMetersPerHour: return value * 1000.0 / 3600.0;
    case FlowUnit::GallonsPerMinute: return value * 3.785411784 / 60.0;
  }
  return value;
}

ParsedTelemetry parse_telemetry_csv(const std::filesystem::path& path,
                                    const TelemetrySchema& schema) {
  const auto table = csv::read_table(path);

  const auto c_ts = table.require_column(schema.timestamp);
  const auto c_pit = table.require_column(schema.p_it);
  const auto c_tsup = table.require_column(schema.t_sup);
  std::array<std::size_t, kLoopCount> c_tret{}, c_q{};
  for (int i = 0; i < kLoopCount; ++i) {
    c_tret[i] = table.require_column(schema.t_ret[i]);
    c_q[i] = table.require_column(schema.q[i]);
  }
  const auto c_pacc = table.require_column(schema.p_acc);
  const auto c_ptotal = table.column(schema.p_total);
  const auto c_pue = table.column(schema.pue);
  std::array<std::optional<std::size_t>, kLoopCount> c_waste{};
  bool have_waste = true;
  for (int i = 0; i < kLoopCount; ++i) {
    c_waste[i] = table.column(schema.waste_heat[i]);
    have_waste = have_waste && c_waste[i].has_value();
  }

  if (table.rows.empty()) throw Error(ErrorCode::EmptyFile, path.string() + " has no data rows");

  ParsedTelemetry out;
  out.data_rows = table.rows.size();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    if (row.size() != table.header.size())
      throw Error(ErrorCode::RowParseError,
                  fmt::format("{}:{}: expected {} fields, found {}", path.string(), line,
                              table.header.size(), row.size()));
    std::optional<RowReject> reject;
    auto required = [&](std::size_t col) -> double {
      if (reject) return 0.0;
      auto v = csv::parse_double(row[col]);
      if (!v) {
        reject = RowReject{line, table.header[col],
                           csv::trim(row[col]).empty() ? "blank required field" : "unparseable number"};
        return 0.0;
      }
      return *v;
    };
    auto optional = [&](std::optional<std::size_t> col) -> std::optional<double> {
      if (!col) return std::nullopt;
      return csv::parse_double(row[*col]);
    };

    TelemetryRecord rec;
    if (auto ts = parse_timestamp(row[c_ts])) {
      rec.timestamp = *ts;
    } else {
      out.rejects.push_back({line, table.header[c_ts], "unparseable timestamp"});
      continue;
    }
    rec.p_it = required(c_pit);
    rec.t_sup = required(c_tsup);
    for (int i = 0; i < kLoopCount; ++i) rec.t_ret[i] = required(c_tret[i]);
    for (int i = 0; i < kLoopCount; ++i)
      rec.q[i] = flow_to_liters_per_second(required(c_q[i]), schema.flow_unit);
    rec.p_acc = required(c_pacc);
    if (reject) {
      out.rejects.push_back(std::move(*reject));
      continue;
    }
    rec.p_total = optional(c_ptotal);
    rec.pue = optional(c_pue);
    if (have_waste) {
      std::array<double, kLoopCount> w{};
      bool all = true;
      for (int i = 0; i < kLoopCount; ++i) {
        auto v = optional(c_waste[i]);
        all = all && v.has_value();
        w[i] = v.value_or(0.0);
      }
      if (all) rec.waste_heat = w;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

CleanDataset clean_and_order(std::vector<TelemetryRecord> records) {
  CleanDataset out;
  std::vector<TelemetryRecord> valid;
  valid.reserve(records.size());
  for (auto& r : records) {
    if (auto why = validate_record(r)) {
      out.removed.push_back({r.timestamp, *why});
    } else {
      valid.push_back(std::move(r));
    }
  }
  if (valid.empty()) throw Error(ErrorCode::AllRowsInvalid, "no record passed validation");

  std::stable_sort(valid.begin(), valid.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  out.records.reserve(valid.size());
  for (auto& r : valid) {
    if (!out.records.empty() && out.records.back().timestamp == r.timestamp) {
      out.removed.push_back({r.timestamp, "duplicate timestamp"});
      continue;
    }
    out.records.push_back(std::move(r));
  }
  for (std::size_t i = 1; i < out.records.size(); ++i) {
    const auto prev = slot_index(out.records[i - 1].timestamp);
    const auto cur = slot_index(out.records[i].timestamp);
    for (auto s = prev + 1; s < cur; ++s) out.gaps.push_back(slot_time(s));
  }
  return out;
}

CalendarContext derive_calendar(Timestamp ts, double p_it, double low_load_threshold) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const hh_mm_ss<seconds> hms{ts - day};
  CalendarContext c;
  c.hour = static_cast<int>(hms.hours().count());
  c.month = static_cast<int>(static_cast<unsigned>(ymd.month()));
  c.weekday = static_cast<int>(weekday{day}.c_encoding());
  c.low_load_flag = p_it < low_load_threshold;
  return c;
}

CalendarContext derive_calendar(const TelemetryRecord& record, double low_load_threshold) {
  return derive_calendar(record.timestamp, record.p_it, low_load_threshold);
}

std::int64_t day_index(Timestamp ts) {
  return std::chrono::floor<std::chrono::days>(ts).time_since_epoch().count();
}

void write_telemetry_csv(const std::filesystem::path& path,
                         const std::vector<TelemetryRecord>& records) {
  csv::Writer w(path);
  w.row({"timestamp", "p_it", "t_sup", "t_ret_1", "t_ret_2", "t_ret_3", "q_1", "q_2", "q_3",
         "p_acc", "p_total", "pue"});
  auto opt = [](const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string{};
  };
  for (const auto& r : records) {
    w.row({format_timestamp(r.timestamp), csv::format_double(r.p_it), csv::format_double(r.t_sup),
           csv::format_double(r.t_ret[0]), csv::format_double(r.t_ret[1]),
           csv::format_double(r.t_ret[2]), csv::format_double(r.q[0]), csv::format_double(r.q[1]),
           csv::format_double(r.q[2]), csv::format_double(r.p_acc), opt(r.p_total), opt(r.pue)});
  }
  w.close();
}

void write_rejects_csv(const std::filesystem::path& path, const std::vector<RowReject>& rejects) {
  csv::Writer w(path);
  w.row({"line", "column", "reason"});
  for (const auto& r : rejects) w.row({std::to_string(r.line), r.column, r.reason});
  w.close();
}

void write_gap_report_csv(const std::filesystem::path& path, const CleanDataset& dataset) {
  csv::Writer w(path);
  w.row({"missing_timestamp"});
  for (auto ts : dataset.gaps) w.row({format_timestamp(ts)});
  w.close();
}

}  // namespace coolopt

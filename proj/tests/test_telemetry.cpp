#include <doctest.h>

#include <random>

#include "coolopt/error.hpp"
#include "coolopt/telemetry.hpp"
#include "oracles.hpp"

using namespace coolopt;
using testutil::at;

namespace {

const char* kHeader = "timestamp,p_it,t_sup,t_ret_1,t_ret_2,t_ret_3,q_1,q_2,q_3,p_acc\n";

std::string row(const char* ts, const char* p_acc = "0.61") {
  return std::string(ts) + ",18.2,31.0,35.1,36.0,34.4,240,430,290," + p_acc + "\n";
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("well-formed file parses every row") {
  testutil::TempDir dir("telemetry");
  testutil::write_text(dir / "t.csv", std::string(kHeader) + row("2023-01-01T00:00") +
                                          row("2023-01-01T00:10") + row("2023-01-01 00:20"));
  const auto parsed = parse_telemetry_csv(dir / "t.csv");
  CHECK(parsed.records.size() == 3);
  CHECK(parsed.rejects.empty());
  CHECK(parsed.records[2].timestamp == at("2023-01-01T00:20"));
  CHECK(parsed.records[0].q[1] == 430.0);
  CHECK_FALSE(parsed.records[0].pue.has_value());
}

TEST_CASE("blank required cell becomes a reject carrying its line") {
  testutil::TempDir dir("telemetry");
  testutil::write_text(dir / "t.csv", std::string(kHeader) + row("2023-01-01T00:00") +
                                          row("2023-01-01T00:10", "") + row("2023-01-01T00:20"));
  const auto parsed = parse_telemetry_csv(dir / "t.csv");
  CHECK(parsed.records.size() == 2);
  REQUIRE(parsed.rejects.size() == 1);
  CHECK(parsed.rejects[0].line == 3);
  CHECK(parsed.rejects[0].column == "p_acc");
  CHECK(parsed.records.size() + parsed.rejects.size() == parsed.data_rows);
}

TEST_CASE("missing column is reported by name") {
  testutil::TempDir dir("telemetry");
  testutil::write_text(dir / "t.csv", "timestamp,p_it,t_ret_1,t_ret_2,t_ret_3,q_1,q_2,q_3,p_acc\n"
                                      "2023-01-01T00:00,18,35,36,34,240,430,290,0.6\n");
  try {
    parse_telemetry_csv(dir / "t.csv");
    FAIL("expected MissingColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingColumn);
    CHECK(std::string(e.what()) == "t_sup");
  }
}

TEST_CASE("structural corruption and empty input") {
  testutil::TempDir dir("telemetry");
  testutil::write_text(dir / "short.csv", std::string(kHeader) + "2023-01-01T00:00,18,31\n");
  CHECK(code_of([&] { parse_telemetry_csv(dir / "short.csv"); }) == ErrorCode::RowParseError);
  testutil::write_text(dir / "quote.csv", std::string(kHeader) + "\"2023-01-01T00:00,18\n");
  CHECK(code_of([&] { parse_telemetry_csv(dir / "quote.csv"); }) == ErrorCode::RowParseError);
  testutil::write_text(dir / "empty.csv", "");
  CHECK(code_of([&] { parse_telemetry_csv(dir / "empty.csv"); }) == ErrorCode::EmptyFile);
  testutil::write_text(dir / "header.csv", kHeader);
  CHECK(code_of([&] { parse_telemetry_csv(dir / "header.csv"); }) == ErrorCode::EmptyFile);
}

TEST_CASE("flow units convert to liters per second") {
  CHECK(flow_to_liters_per_second(3.6, FlowUnit::CubicMetersPerHour) == doctest::Approx(1.0));
  CHECK(flow_to_liters_per_second(60.0, FlowUnit::GallonsPerMinute) == doctest::Approx(3.785411784));
  CHECK(parse_flow_unit("gpm") == FlowUnit::GallonsPerMinute);
  CHECK_FALSE(parse_flow_unit("furlongs").has_value());
}

TEST_CASE("clean_and_order on sorted valid input is the identity") {
  std::vector<TelemetryRecord> recs{testutil::record(at("2023-01-01T00:00")),
                                    testutil::record(at("2023-01-01T00:10"))};
  const auto clean = clean_and_order(recs);
  CHECK(clean.records == recs);
  CHECK(clean.gaps.empty());
  CHECK(clean.removed.empty());
}

TEST_CASE("duplicates keep the first occurrence") {
  auto t1 = testutil::record(at("2023-01-01T00:00"), 18.0, 0.5);
  auto t1b = testutil::record(at("2023-01-01T00:00"), 18.0, 0.7);
  auto t2 = testutil::record(at("2023-01-01T00:10"));
  const auto clean = clean_and_order({t2, t1, t1b});
  REQUIRE(clean.records.size() == 2);
  CHECK(clean.records[0].p_acc == 0.5);
  CHECK(clean.records[1].timestamp == t2.timestamp);
  REQUIRE(clean.removed.size() == 1);
  CHECK(clean.removed[0].reason == "duplicate timestamp");
}

TEST_CASE("gap report lists every missing slot") {
  const auto clean = clean_and_order(
      {testutil::record(at("2023-01-01T00:00")), testutil::record(at("2023-01-01T00:30"))});
  REQUIRE(clean.gaps.size() == 2);
  CHECK(clean.gaps[0] == at("2023-01-01T00:10"));
  CHECK(clean.gaps[1] == at("2023-01-01T00:20"));
}

TEST_CASE("all-invalid input is rejected") {
  auto bad = testutil::record(at("2023-01-01T00:00"));
  bad.p_it = 0.0;
  CHECK(code_of([&] { clean_and_order({bad}); }) == ErrorCode::AllRowsInvalid);
}

TEST_CASE("cleaning is idempotent and emits only valid records") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> slot(0, 60), fault(0, 7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TelemetryRecord> recs;
    for (int i = 0; i < 40; ++i) {
      auto r = testutil::record(slot_time(slot_index(at("2023-03-01T00:00")) + slot(rng)));
      switch (fault(rng)) {
        case 0: r.p_it = -1.0; break;
        case 1: r.p_acc = -0.2; break;
        case 2: r.q[1] = -5.0; break;
        case 3: r.pue = 0.9; break;
        case 4: r.timestamp += std::chrono::seconds(60); break;
        default: break;
      }
      recs.push_back(r);
    }
    recs.push_back(testutil::record(at("2023-03-02T00:00")));
    const auto once = clean_and_order(recs);
    const auto twice = clean_and_order(once.records);
    CHECK(twice.records == once.records);
    CHECK(twice.gaps == once.gaps);
    for (std::size_t i = 0; i < once.records.size(); ++i) {
      CHECK_FALSE(validate_record(once.records[i]).has_value());
      if (i) CHECK(once.records[i].timestamp > once.records[i - 1].timestamp);
    }
  }
}

TEST_CASE("calendar fields") {
  auto r = testutil::record(at("2023-01-01T00:00"), 12.0);
  auto c = derive_calendar(r, 10.0);
  CHECK(c.hour == 0);
  CHECK(c.month == 1);
  CHECK(c.weekday == 0);  // a Sunday
  CHECK_FALSE(c.low_load_flag);

  c = derive_calendar(at("2023-08-15T05:10"), 8.5, 10.0);
  CHECK(c.hour == 5);
  CHECK(c.month == 8);
  CHECK(c.low_load_flag);

  c = derive_calendar(at("2023-12-31T23:50"), 20.0, 10.0);
  CHECK(c.hour == 23);
  CHECK(c.month == 12);
}

TEST_CASE("timestamps round-trip and malformed text is refused") {
  CHECK(format_timestamp(at("2023-06-30 13:40")) == "2023-06-30T13:40:00");
  CHECK_FALSE(parse_timestamp("2023-02-30T00:00").has_value());
  CHECK_FALSE(parse_timestamp("2023/01/01 00:00").has_value());
  CHECK_FALSE(parse_timestamp("2023-01-01T24:00").has_value());
}

TEST_CASE("written telemetry parses back to the same records") {
  testutil::TempDir dir("telemetry");
  auto a = testutil::record(at("2023-05-01T10:00"), 17.25, 0.6125);
  a.pue = (a.p_it + a.p_acc) / a.p_it;
  a.p_total = a.p_it + a.p_acc;
  auto b = testutil::record(at("2023-05-01T10:10"), 19.5, 0.7);
  b.pue = (b.p_it + b.p_acc) / b.p_it;
  b.p_total = b.p_it + b.p_acc;
  write_telemetry_csv(dir / "rt.csv", {a, b});
  const auto parsed = parse_telemetry_csv(dir / "rt.csv");
  REQUIRE(parsed.records.size() == 2);
  CHECK(parsed.records[0] == a);
  CHECK(parsed.records[1] == b);
}

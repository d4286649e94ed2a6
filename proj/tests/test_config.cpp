#include <doctest.h>

#include "coolopt/config.hpp"
#include "coolopt/error.hpp"
#include "oracles.hpp"

using namespace coolopt;

namespace {

ErrorCode code_of(const std::string& json) {
  try {
    parse_run_config(json);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error for " << json);
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("empty document keeps the defaults") {
  const auto cfg = parse_run_config("{}");
  CHECK(dump_run_config(cfg) == dump_run_config(RunConfig{}));
  CHECK(cfg.synth.days == 90);
  CHECK(cfg.review.s_min == 0.02);
  CHECK(enumerate_actions(cfg.counterfactual.grid).size() == 324);
  CHECK_FALSE(cfg.threads.has_value());
}

TEST_CASE("dump and parse round-trip") {
  RunConfig cfg;
  cfg.synth.days = 30;
  cfg.synth.episodes.push_back({testutil::at("2023-01-05T06:00"), 12.0, 1.4});
  cfg.synth.maintenance.push_back({testutil::at("2023-01-09T00:00"), 3.0, 10.0});
  cfg.tariff.kind = TariffSchedule::Kind::Flat;
  cfg.tariff.flat_price = 0.09;
  cfg.tariff.demand_rate = 12.5;
  cfg.counterfactual.guardrails.t_sup_max = 33.5;
  cfg.counterfactual.grid.d_tsup = {0.0, 0.3};
  cfg.review.hysteresis_idle_steps = 4;
  cfg.threads = 3;
  cfg.paths.output_dir = "elsewhere";
  const auto text = dump_run_config(cfg);
  const auto back = parse_run_config(text);
  CHECK(dump_run_config(back) == text);
  CHECK(back.synth.episodes.size() == 1);
  CHECK(back.synth.episodes[0].flow_multiplier == 1.4);
  CHECK(back.tariff.demand_rate == 12.5);
  CHECK(back.counterfactual.guardrails.t_sup_max == 33.5);
  CHECK(back.threads == 3);
  CHECK(back.paths.output_dir == "elsewhere");
}

TEST_CASE("partial documents override only what they name") {
  const auto cfg = parse_run_config(R"({"review": {"s_min": 0.05}, "synth": {"law": {"sigma": 0.0}}})");
  CHECK(cfg.review.s_min == 0.05);
  CHECK(cfg.review.hysteresis_idle_steps == 2);
  CHECK(cfg.synth.law.sigma == 0.0);
  CHECK(cfg.synth.law.k_p == 2e-10);
}

TEST_CASE("malformed documents") {
  CHECK(code_of(R"({"reveiw": {}})") == ErrorCode::InvalidConfig);
  CHECK(code_of(R"({"review": {"s_minimum": 0.1}})") == ErrorCode::InvalidConfig);
  CHECK(code_of(R"({"review": {"s_min": "high"}})") == ErrorCode::InvalidConfig);
  CHECK(code_of(R"({"tariff": {"kind": "spot"}})") == ErrorCode::InvalidConfig);
  CHECK(code_of(R"({"synth": {"episodes": [{"start": "yesterday"}]}})") == ErrorCode::InvalidConfig);
  CHECK(code_of("{not json") == ErrorCode::InvalidConfig);
  CHECK(code_of("[1, 2]") == ErrorCode::InvalidConfig);
}

TEST_CASE("semantic validation") {
  auto rejects = [](const std::string& json) {
    try {
      parse_run_config(json).validate();
    } catch (const Error& e) {
      return e.code() == ErrorCode::InvalidConfig;
    }
    return false;
  };
  CHECK(rejects(R"({"guardrails": {"alpha": 1.5}})"));
  CHECK(rejects(R"({"actions": {"s_dom": [1.0, 0.5]}})"));
  CHECK(rejects(R"({"split": {"test_fraction": 1.0}})"));
  CHECK(rejects(R"({"threads": 0})"));
  CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("one seed reaches every stage") {
  RunConfig cfg;
  cfg.set_seed(99);
  CHECK(cfg.synth.seed == 99);
  CHECK(cfg.surrogate.split_seed == 99);
  CHECK(cfg.surrogate.regime_seed == 99);
  CHECK(cfg.surrogate.train.seed == 99);
}

TEST_CASE("default paths live in the output directory") {
  PathsConfig p;
  p.output_dir = "runs/a";
  CHECK(p.input_or_default() == std::filesystem::path("runs/a/telemetry.csv"));
  CHECK(p.model_or_default() == std::filesystem::path("runs/a/model.json"));
  p.model = "shared/model.json";
  CHECK(p.model_or_default() == std::filesystem::path("shared/model.json"));
}

TEST_CASE("missing config file") {
  try {
    load_run_config("/nonexistent/coolopt.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "coolopt/error.hpp"
#include "coolopt/surrogate.hpp"
#include "coolopt/synthetic_plant.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace coolopt;

namespace {

const Scenario& scenario() { return fixture::two_weeks(); }
const SurrogateModel& model() { return fixture::two_week_model(); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("implied PUE") {
  CHECK(implied_pue(12.0, 0.6) == doctest::Approx(1.05));
  CHECK(implied_pue(10.0, 0.0) == 1.0);
  CHECK(implied_pue(10.0, -0.1) == 1.0);
  CHECK(code_of([] { implied_pue(0.0, 0.5); }) == ErrorCode::NonPositiveItPower);
}

TEST_CASE("metric examples") {
  const std::vector<double> y{0.5, 0.7, 0.6, 0.8}, p_it{10, 12, 11, 14};
  auto r = evaluate_metrics(y, y, p_it);
  CHECK(r.mae == 0.0);
  CHECK(r.rmse == 0.0);
  CHECK(r.smape == 0.0);
  CHECK(r.wape == 0.0);
  CHECK(r.rmsle == 0.0);
  CHECK(*r.r2 == 1.0);
  CHECK(r.pue_within_001 == 1.0);

  const std::vector<double> mean(4, 0.65);
  CHECK(*evaluate_metrics(y, mean, p_it).r2 == doctest::Approx(0.0).epsilon(1e-12));

  r = evaluate_metrics(std::vector<double>{1, 3}, std::vector<double>{2, 2}, std::vector<double>{10, 10});
  CHECK(r.mae == 1.0);
  CHECK(r.rmse == 1.0);
  CHECK(r.wape == 0.5);

  r = evaluate_metrics(std::vector<double>{0.6, 0.6}, std::vector<double>{0.5, 0.7}, std::vector<double>{10, 10});
  CHECK_FALSE(r.r2.has_value());

  r = evaluate_metrics(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}, std::vector<double>{10, 10});
  CHECK(r.smape == 0.0);

  CHECK(code_of([] {
          evaluate_metrics(std::vector<double>{1, 2}, std::vector<double>{1}, std::vector<double>{1, 2});
        }) == ErrorCode::LengthMismatch);
}

TEST_CASE("metrics agree with the reference formulas") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.3, 0.9), e(-0.1, 0.1), pit(8, 29);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> y(200), yhat(200), p(200);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = u(rng);
      yhat[i] = std::max(0.0, y[i] + e(rng));
      p[i] = pit(rng);
    }
    const auto got = evaluate_metrics(y, yhat, p);
    const auto want = oracle::metrics(y, yhat);
    CHECK(got.mae == doctest::Approx(want.mae).epsilon(1e-12));
    CHECK(got.rmse == doctest::Approx(want.rmse).epsilon(1e-12));
    CHECK(*got.r2 == doctest::Approx(want.r2).epsilon(1e-10));
    CHECK(got.smape == doctest::Approx(want.smape).epsilon(1e-12));
    CHECK(got.wape == doctest::Approx(want.wape).epsilon(1e-12));
    CHECK(got.rmsle == doctest::Approx(want.rmsle).epsilon(1e-12));
    CHECK(got.mae <= got.rmse);
    double within = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      within += std::abs((p[i] + yhat[i]) / p[i] - (p[i] + y[i]) / p[i]) <= 0.01;
    CHECK(got.pue_within_001 == doctest::Approx(within / y.size()));
    double prev = 0;
    for (double tol : {0.0, 0.001, 0.002, 0.005, 0.01, 0.05}) {
      const double f = pue_within_fraction(y, yhat, p, tol);
      CHECK(f >= prev);
      prev = f;
    }
  }
}

TEST_CASE("percentile interpolates between order statistics") {
  CHECK(percentile({3, 1, 2}, 0.5) == 2.0);
  CHECK(percentile({0, 10}, 0.25) == 2.5);
  CHECK(percentile({4, 0, 8, 2}, 0.0) == 0.0);
  CHECK(percentile({4, 0, 8, 2}, 1.0) == 8.0);
}

TEST_CASE("too little data is refused") {
  ScenarioConfig cfg;
  cfg.days = 3;  // 432 rows
  const auto s = generate_scenario(cfg);
  CHECK(code_of([&] { train_surrogate(s.dataset, SurrogateConfig{}); }) == ErrorCode::TooFewSamples);
}

TEST_CASE("trained model is consistent") {
  const auto& m = model();
  CHECK(m.train_rows + m.test_rows + 1 == scenario().dataset.records.size());
  CHECK(m.test_rows == static_cast<std::size_t>(std::llround(0.2 * (m.train_rows + m.test_rows))));
  for (const auto& band : {m.percentiles.t_sup, m.percentiles.q_tot, m.percentiles.mean_delta_t,
                           m.percentiles.q_tot_heat})
    CHECK(band.p1 < band.p99);
  CHECK(m.test_metrics.mae <= m.test_metrics.rmse);
  CHECK(*m.test_metrics.r2 > 0.75);
  CHECK(m.ensemble.feature_count() == m.schema.size());
}

TEST_CASE("training is deterministic") {
  const auto again = train_surrogate(scenario().dataset, SurrogateConfig{});
  CHECK(again == model());
}

TEST_CASE("calibrated prediction is monotone in IT power and floored at zero") {
  const auto& m = model();
  const auto X = surrogate_features(m, scenario().dataset);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < X.rows; i += 7) rows.emplace_back(X.row(i).begin(), X.row(i).end());
  const auto p_it = *m.schema.index_of("p_it");
  auto predict = [&](const std::vector<double>& r) { return predict_accessory_power(m, r); };
  CHECK(oracle::monotone_violations(predict, rows, p_it, 5.0, 32.0, 2000, 1) == 0);
  for (const auto& r : rows) CHECK(predict(r) >= 0.0);

  auto shifted = m;
  shifted.calibrator = {{-1e9, 1e9}, {-5.0, -5.0}};
  CHECK(predict_accessory_power(shifted, rows[0]) == 0.0);
}

TEST_CASE("artifact round-trips exactly") {
  testutil::TempDir dir("surrogate");
  save_model(dir / "m.json", model());
  const auto loaded = load_model(dir / "m.json");
  CHECK(loaded == model());
  save_model(dir / "m2.json", loaded);
  CHECK(testutil::read_text(dir / "m.json") == testutil::read_text(dir / "m2.json"));

  const auto X = surrogate_features(model(), scenario().dataset);
  for (std::size_t i = 0; i < X.rows; i += 97)
    CHECK(predict_accessory_power(loaded, X.row(i)) == predict_accessory_power(model(), X.row(i)));
}

TEST_CASE("artifact validation") {
  testutil::TempDir dir("surrogate");
  CHECK(code_of([&] { load_model(dir / "absent.json"); }) == ErrorCode::IoError);
  testutil::write_text(dir / "junk.json", "{\"format\": \"something-else\"}");
  CHECK(code_of([&] { load_model(dir / "junk.json"); }) == ErrorCode::ArtifactError);
  testutil::write_text(dir / "broken.json", "{not json");
  CHECK(code_of([&] { load_model(dir / "broken.json"); }) == ErrorCode::ArtifactError);

  save_model(dir / "m.json", model());
  auto text = testutil::read_text(dir / "m.json");
  const auto pos = text.find("\"q_tot_cubed\"");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 13, "\"q_tot_cube2\"");
  testutil::write_text(dir / "tampered.json", text);
  CHECK(code_of([&] { load_model(dir / "tampered.json"); }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("metrics report lists train and test columns") {
  testutil::TempDir dir("surrogate");
  write_metrics_csv(dir / "metrics.csv", model());
  const auto text = testutil::read_text(dir / "metrics.csv");
  CHECK(text.rfind("metric,train,test\n", 0) == 0);
  CHECK(text.find("\nR2,") != std::string::npos);
  CHECK(text.find("\nPUE within +-0.01,") != std::string::npos);
}

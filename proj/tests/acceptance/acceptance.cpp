// Acceptance suite: prints one PASS/FAIL/SKIPPED line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <tbb/global_control.h>
#include <tbb/task_arena.h>

#include "coolopt/cli.hpp"
#include "coolopt/config.hpp"
#include "coolopt/counterfactual.hpp"
#include "coolopt/error.hpp"
#include "coolopt/excess_monitor.hpp"
#include "coolopt/isotonic.hpp"
#include "coolopt/monotone_gbt.hpp"
#include "coolopt/review.hpp"
#include "coolopt/surrogate.hpp"
#include "coolopt/synthetic_plant.hpp"
#include "../oracles.hpp"

using namespace coolopt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Suite {
 public:
  void run(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (budget_s > 0.0 && secs >= budget_s) {
      o.pass = false;
      o.detail += fmt::format("; over the {:.0f} s budget", budget_s);
    }
    report(o.pass ? "PASS" : "FAIL", id, name, fmt::format("{:.1f} s", secs), o.detail);
    failures_ += o.pass ? 0 : 1;
  }

  void skip(int id, const std::string& name, const std::string& why) { report("SKIPPED", id, name, "-", why); }

  int failures() const { return failures_; }

 private:
  static void report(const char* verdict, int id, const std::string& name, const std::string& time,
                     const std::string& detail) {
    std::cout << fmt::format("{:<8} #{:<2} {:<34} [{:>8}] {}\n", verdict, id, name, time, detail) << std::flush;
  }

  int failures_ = 0;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Three 48 h bypass episodes at 1.6x flow, one per month of a 90-day run.
ScenarioConfig episode_scenario() {
  ScenarioConfig cfg;
  for (int day : {12, 42, 72}) cfg.episodes.push_back({cfg.start + std::chrono::days(day), 48.0, 1.6});
  return cfg;
}

// Closed-form injected energy from the recorded flows and the cubic pump law.
double closed_form_excess(const Scenario& s, const PlantLaw& law) {
  double energy = 0.0;
  for (std::size_t i = 0; i < s.sidecar.size(); ++i) {
    if (!s.sidecar[i].in_episode) continue;
    const auto& q = s.dataset.records[i].q;
    const double q_tot = q[0] + q[1] + q[2];
    const double m = s.sidecar[i].flow_multiplier;
    energy += law.k_p * q_tot * q_tot * q_tot * (m * m * m - 1.0) / 6.0;
  }
  return energy;
}

Outcome monotonicity() {
  ScenarioConfig sc;
  sc.days = 30;
  const auto scenario = generate_scenario(sc);
  const auto model = train_surrogate(scenario.dataset, {});
  const auto X = surrogate_features(model, scenario.dataset);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < X.rows; i += 3) rows.emplace_back(X.row(i).begin(), X.row(i).end());
  auto predict = [&](const std::vector<double>& r) { return predict_accessory_power(model, r); };

  constexpr std::size_t kProbes = 10000;
  std::size_t constrained = 0, violations = 0;
  for (std::size_t f = 0; f < model.schema.monotone.size(); ++f) {
    if (model.schema.monotone[f] != 1) continue;
    ++constrained;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& r : rows)
      if (!std::isnan(r[f])) lo = std::min(lo, r[f]), hi = std::max(hi, r[f]);
    const double pad = 0.1 * (hi - lo);
    violations += oracle::monotone_violations(predict, rows, f, lo - pad, hi + pad, kProbes, 1000 + f);
  }
  return {constrained >= 1 && violations == 0,
          fmt::format("{} constrained features x {} probe pairs, {} violations", constrained, kProbes, violations)};
}

Outcome pava_exhaustive() {
  std::size_t arrays = 0, mismatches = 0;
  double worst = 0.0;
  bool singleton_rejected = false;
  try {
    fit_isotonic(std::vector<double>{0.0}, std::vector<double>{1.0});
  } catch (const Error& e) {
    singleton_rejected = e.code() == ErrorCode::LengthMismatch;
  }
  for (std::size_t n = 2; n <= 8; ++n) {
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = static_cast<double>(i);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<double> y(n);
      for (std::size_t i = 0, c = code; i < n; ++i, c /= 3) y[i] = static_cast<double>(c % 3);
      const auto want = oracle::isotonic_brute_force(y);
      const auto map = fit_isotonic(raw, y);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(apply_isotonic(map, raw[i]) - want[i]));
      worst = std::max(worst, err);
      mismatches += err > 1e-9;
      ++arrays;
    }
  }
  return {mismatches == 0 && singleton_rejected,
          fmt::format("{} arrays of length 2-8, max deviation {:.2e}; length 1 {}", arrays, worst,
                      singleton_rejected ? "rejected as LengthMismatch" : "not rejected")};
}

Outcome first_split() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> size(12, 64);
  TrainConfig cfg;
  cfg.exact_splits = true;
  cfg.max_leaves = 2;
  cfg.min_samples_leaf = 2;
  const std::vector<int> unconstrained{0, 0};
  std::size_t agree = 0;
  constexpr int kCases = 50;
  for (int trial = 0; trial < kCases; ++trial) {
    const auto n = static_cast<std::size_t>(size(rng));
    FeatureMatrix X;
    X.rows = n;
    X.cols = 2;
    X.values.resize(2 * n);
    std::vector<std::vector<double>> cols(2, std::vector<double>(n));
    std::vector<double> y(n);
    const double weight = u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      cols[0][i] = 10.0 * u(rng);
      cols[1][i] = std::floor(6.0 * u(rng));
      X.values[2 * i] = cols[0][i];
      X.values[2 * i + 1] = cols[1][i];
      y[i] = weight * std::cos(cols[0][i]) + (1.0 - weight) * (cols[1][i] > 2.0) + 0.3 * u(rng);
    }
    const auto want = oracle::best_split(cols, y, cfg.min_samples_leaf);
    const auto tree = fit_tree(X, y, unconstrained, cfg);
    if (tree.nodes.empty() || tree.nodes[0].feature != want.feature) continue;
    const auto f = static_cast<std::size_t>(want.feature);
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) same &= (cols[f][i] <= tree.nodes[0].threshold) == want.goes_left[i];
    agree += same;
  }
  return {agree == kCases, fmt::format("{}/{} first splits match the exhaustive search", agree, kCases)};
}

Outcome fidelity() {
  ScenarioConfig sc;
  const auto scenario = generate_scenario(sc);
  const auto model = train_surrogate(scenario.dataset, {});
  const auto& m = model.test_metrics;
  const double r2 = m.r2.value_or(-INFINITY);
  const bool ok = sc.law.sigma == 0.01 && r2 >= 0.75 && m.smape <= 8.0 && m.pue_within_001 >= 0.95;
  return {ok, fmt::format("test R2 {:.4f} (>= 0.75), SMAPE {:.3f}% (<= 8), PUE within 0.01 {:.4f} (>= 0.95)", r2,
                          m.smape, m.pue_within_001)};
}

struct EpisodeRun {
  ScenarioConfig config = episode_scenario();
  Scenario scenario;
  SurrogateModel model;
  ExcessSeries excess;
};

EpisodeRun& episode_run() {
  static EpisodeRun run = [] {
    EpisodeRun r;
    r.scenario = generate_scenario(r.config);
    r.model = train_surrogate(r.scenario.dataset, {});
    r.excess = compute_excess(r.scenario.dataset, r.model, TariffSchedule{});
    return r;
  }();
  return run;
}

Outcome excess_recovery() {
  const auto& run = episode_run();
  const double e_star = closed_form_excess(run.scenario, run.config.law);
  double inside = 0.0, outside = 0.0;
  for (std::size_t i = 0; i < run.excess.intervals.size(); ++i)
    (run.scenario.sidecar[i].in_episode ? inside : outside) += run.excess.intervals[i].e_excess;
  const bool consistent = std::abs(e_star - injected_excess_energy(run.config)) <= 1e-9;
  return {consistent && inside >= 0.8 * e_star && outside <= 0.2 * e_star,
          fmt::format("E* {:.3f} MWh; inside {:.3f} ({:.1f}% of E*), outside {:.3f} ({:.1f}%)", e_star, inside,
                      100.0 * inside / e_star, outside, 100.0 * outside / e_star)};
}

Outcome counterfactual_soundness() {
  const auto& run = episode_run();
  const TariffSchedule tariff;
  const auto ledger = run_counterfactual(run.scenario.dataset, run.model, tariff, CounterfactualConfig{});
  std::size_t breaches = 0;
  for (const auto& e : ledger.entries) breaches += e.failures != 0;
  for (auto b : ledger.breaches) breaches += b;

  const auto review = build_review(ledger, run.excess, review_config_for(run.model));
  const double tol = 1e-12;
  const bool capped_ok = review.capped.energy <= review.excess_energy + tol && review.capture_capped <= 1.0 + tol;
  const bool shrink_ok = review.reviewer_raw.energy <= review.raw.energy + tol &&
                         review.reviewer_capped.energy <= review.capped.energy + tol &&
                         review.reviewer_capped.energy <= review.reviewer_raw.energy + tol &&
                         review.reviewer_raw.cost <= review.raw.cost + tol &&
                         review.reviewer_capped.cost <= review.capped.cost + tol && review.accepted <= review.material;

  // Nested grids: small within default within an extended grid.
  CounterfactualConfig small, extended;
  small.grid.d_tsup = {0.0, 0.5, 1.0};
  small.grid.s_dom = {1.0, 0.94};
  small.grid.s_non = {1.0, 0.96};
  extended.grid.d_tsup.insert(extended.grid.d_tsup.end(), {0.1, 0.3, 1.7});
  extended.grid.s_dom.insert(extended.grid.s_dom.end(), {0.97, 0.93});
  extended.grid.s_non.insert(extended.grid.s_non.end(), {0.97, 0.93});
  const auto lower = run_counterfactual(run.scenario.dataset, run.model, tariff, small);
  const auto upper = run_counterfactual(run.scenario.dataset, run.model, tariff, extended);
  std::size_t drops = 0;
  for (std::size_t i = 0; i < ledger.entries.size(); ++i) {
    drops += ledger.entries[i].saving < lower.entries[i].saving;
    drops += upper.entries[i].saving < ledger.entries[i].saving;
  }
  return {breaches == 0 && capped_ok && shrink_ok && drops == 0,
          fmt::format("(a) breaches {}; (b) capped {:.3f} <= excess {:.3f} MWh, capture {:.3f}; "
                      "(c) reviewer {:.3f} <= raw {:.3f} MWh; (d) {} intervals lost saving over {}/{}/{} actions",
                      breaches, review.capped.energy, review.excess_energy, review.capture_capped,
                      review.reviewer_capped.energy, review.raw.energy, drops,
                      enumerate_actions(small.grid).size(), enumerate_actions(CounterfactualConfig{}.grid).size(),
                      enumerate_actions(extended.grid).size())};
}

Outcome conservation() {
  const auto& run = episode_run();
  const auto views = aggregate_views(run.excess);
  const double total = run.excess.total_energy();
  auto sum = [](const std::vector<PeriodTotal>& v) {
    double s = 0.0;
    for (const auto& p : v) s += p.energy;
    return s;
  };
  const double gaps[] = {std::abs(sum(views.daily) - total), std::abs(sum(views.monthly) - total),
                         std::abs(views.hour_month_total() - total), std::abs(sum(views.regime) - total),
                         std::abs(sum(views.weekday) - total)};
  const double worst_view = *std::max_element(std::begin(gaps), std::end(gaps));

  CounterfactualConfig cfg;
  cfg.grid.d_tsup = {0.0, 0.5, 1.0, 1.5};
  const auto ledger = run_counterfactual(run.scenario.dataset, run.model, TariffSchedule{}, cfg);
  std::size_t inexact = 0;
  double saving = 0.0;
  for (const auto& e : ledger.entries) {
    inexact += e.e_save != e.saving * (1.0 / 6.0);
    saving += e.saving;
  }
  const double ledger_gap = std::abs(ledger.total_energy() - saving / 6.0);
  return {worst_view <= 1e-9 && inexact == 0 && ledger_gap <= 1e-9,
          fmt::format("worst view gap {:.2e} MWh over {:.3f} MWh; {} inexact e_save entries, total gap {:.2e}",
                      worst_view, total, inexact, ledger_gap)};
}

std::vector<std::string> pipeline_outputs(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().filename() != "run_config.json") names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

int run_pipeline(const fs::path& config, const fs::path& out, int threads) {
  for (const char* cmd : {"synth", "train", "excess", "cfsearch", "review"}) {
    const std::string c = config.string(), o = out.string(), t = std::to_string(threads);
    const char* argv[] = {"coolopt", "--config", c.c_str(), "--out", o.c_str(), "--threads", t.c_str(), cmd};
    std::ostringstream sink;
    if (const int code = run_cli(8, argv, sink, std::cerr)) return code;
  }
  return 0;
}

Outcome determinism() {
  testutil::TempDir dir("acceptance_det");
  testutil::write_text(dir / "config.json", R"({
    "synth": {"days": 30, "episodes": [{"start": "2023-01-12T00:00", "hours": 24, "flow_multiplier": 1.5}]}
  })");
  if (run_pipeline(dir / "config.json", dir / "one", 1)) return {false, "single-thread pipeline failed"};

  constexpr int kThreads = 4;
  int code = 0, observed = 0;
  {
    tbb::global_control allow(tbb::global_control::max_allowed_parallelism, kThreads);
    tbb::task_arena arena(kThreads);
    arena.execute([&] {
      observed = tbb::this_task_arena::max_concurrency();
      code = run_pipeline(dir / "config.json", dir / "many", kThreads);
    });
  }
  if (code) return {false, "multi-thread pipeline failed"};

  const auto names = pipeline_outputs(dir / "one");
  std::size_t differing = 0;
  std::string first;
  for (const auto& name : names)
    if (testutil::read_text(dir / "one" / name) != testutil::read_text(dir / "many" / name)) {
      ++differing;
      if (first.empty()) first = name;
    }
  const bool same_set = names == pipeline_outputs(dir / "many");
  const bool has_core = std::count(names.begin(), names.end(), "ledger.csv") &&
                        std::count(names.begin(), names.end(), "metrics.csv") &&
                        std::count(names.begin(), names.end(), "review_summary.csv");
  return {same_set && has_core && differing == 0 && observed == kThreads,
          fmt::format("{} output files at 1 vs {} threads (arena concurrency {}), {} differ{}", names.size(),
                      kThreads, observed, differing, first.empty() ? "" : " first: " + first)};
}

Outcome performance() {
  ScenarioConfig sc;
  sc.days = 365;
  const auto scenario = generate_scenario(sc);
  const auto model = train_surrogate(scenario.dataset, {});
  CounterfactualConfig cfg;
  cfg.skip_infeasible_predictions = false;
  const auto actions = enumerate_actions(cfg.grid).size();
  const auto t0 = Clock::now();
  const auto ledger = run_counterfactual(scenario.dataset, model, TariffSchedule{}, cfg);
  const double secs = seconds_since(t0);
  const double evaluations = static_cast<double>(actions) * static_cast<double>(ledger.entries.size());
  return {actions == 324 && ledger.entries.size() == 52560 && secs < 600.0,
          fmt::format("{} actions x {} intervals = {:.1f}M surrogate evaluations in {:.1f} s (< 600)", actions,
                      ledger.entries.size(), evaluations / 1e6, secs)};
}

// Optional reproduction on a user-supplied telemetry export of the real plant.
struct Workbook {
  SurrogateModel model;
  ExcessSeries excess;
  ReviewReport review;
};

Workbook run_workbook(const fs::path& csv, const char* config_path) {
  const RunConfig cfg = config_path ? load_run_config(config_path) : RunConfig{};
  auto parsed = parse_telemetry_csv(csv, cfg.schema);
  const auto data = clean_and_order(std::move(parsed.records));
  TariffSchedule flat;
  flat.kind = TariffSchedule::Kind::Flat;
  flat.flat_price = 0.06;  // $60 per MWh
  Workbook w;
  w.model = train_surrogate(data, cfg.surrogate);
  w.excess = compute_excess(data, w.model, flat);
  const auto ledger = run_counterfactual(data, w.model, flat, cfg.counterfactual);
  w.review = build_review(ledger, w.excess, cfg.review.resolve(w.model));
  return w;
}

}  // namespace

int main() {
  Suite suite;
  suite.run(1, "monotonicity probes", 30.0, monotonicity);
  suite.run(2, "isotonic exhaustive oracle", 10.0, pava_exhaustive);
  suite.run(3, "single-tree first split oracle", 10.0, first_split);
  suite.run(4, "synthetic end-to-end fidelity", 120.0, fidelity);
  suite.run(5, "injected excess recovery", 120.0, excess_recovery);
  suite.run(6, "counterfactual soundness", 180.0, counterfactual_soundness);
  suite.run(7, "conservation", 0.0, conservation);
  suite.run(8, "determinism across thread counts", 0.0, determinism);
  suite.run(9, "full-year grid search", 600.0, performance);

  const char* workbook = std::getenv("COOLOPT_WORKBOOK_CSV");
  if (!workbook || !*workbook) {
    const std::string why = "set COOLOPT_WORKBOOK_CSV to a telemetry export to run";
    suite.skip(10, "real-plant surrogate metrics", why);
    suite.skip(11, "real-plant annual excess", why);
    suite.skip(12, "real-plant capture and frequency", why);
  } else {
    std::optional<Workbook> w;
    std::string failure;
    try {
      w = run_workbook(workbook, std::getenv("COOLOPT_WORKBOOK_CONFIG"));
    } catch (const std::exception& e) {
      failure = e.what();
    }
    auto guarded = [&](auto check) {
      return [&, check]() -> Outcome { return w ? check(*w) : Outcome{false, "pipeline failed: " + failure}; };
    };
    suite.run(10, "real-plant surrogate metrics", 0.0, guarded([](const Workbook& w) {
                const auto& m = w.model.test_metrics;
                return Outcome{m.mae <= 0.036 && m.pue_within_001 >= 0.97,
                               fmt::format("test MAE {:.4f} MW (<= 0.036), PUE within 0.01 {:.4f} (>= 0.97)", m.mae,
                                           m.pue_within_001)};
              }));
    suite.run(11, "real-plant annual excess", 0.0, guarded([](const Workbook& w) {
                const double e = w.excess.total_energy();
                return Outcome{std::abs(e - 85.2) <= 0.25 * 85.2,
                               fmt::format("excess {:.2f} MWh, cost ${:.2f} (85.2 MWh +-25%)", e,
                                           w.excess.total_cost())};
              }));
    suite.run(12, "real-plant capture and frequency", 0.0, guarded([](const Workbook& w) {
                const auto& r = w.review;
                return Outcome{r.capture_capped >= 0.85 && r.action_frequency >= 0.01 && r.action_frequency <= 0.08,
                               fmt::format("capped capture {:.4f} (>= 0.85), action frequency {:.4f} in [0.01, 0.08]",
                                           r.capture_capped, r.action_frequency)};
              }));
  }

  std::cout << (suite.failures() ? fmt::format("{} criteria failed\n", suite.failures()) : "all criteria passed\n");
  return suite.failures() ? 1 : 0;
}

#include "coolopt/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include <fmt/format.h>
#include <tbb/global_control.h>

#include "CLI11.hpp"
#include "coolopt/config.hpp"
#include "coolopt/error.hpp"

namespace coolopt {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config;
  std::string out;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

void ensure_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw Error(ErrorCode::IoError, "cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (!g.out.empty()) cfg.paths.output_dir = g.out;
  if (g.seed) cfg.set_seed(*g.seed);
  if (g.threads > 0) cfg.threads = g.threads;
  cfg.validate();
  ensure_output_dir(cfg.paths.output_dir);
  write_text(cfg.paths.output_dir / "run_config.json", dump_run_config(cfg));
  return cfg;
}

CleanDataset load_dataset(const RunConfig& cfg, std::ostream& out, bool write_reports) {
  const auto input = cfg.paths.input_or_default();
  auto parsed = parse_telemetry_csv(input, cfg.schema);
  auto data = clean_and_order(std::move(parsed.records));
  out << fmt::format("telemetry: {} rows read, {} rejected, {} removed in cleaning, {} kept, {} gap slots\n",
                     parsed.data_rows, parsed.rejects.size(), data.removed.size(), data.records.size(),
                     data.gaps.size());
  if (write_reports) {
    const auto& dir = cfg.paths.output_dir;
    write_rejects_csv(dir / "rejects.csv", parsed.rejects);
    write_gap_report_csv(dir / "gaps.csv", data);
  }
  return data;
}

void print_metrics(std::ostream& out, const SurrogateModel& m) {
  const auto& a = m.train_metrics;
  const auto& b = m.test_metrics;
  auto r2 = [](const MetricReport& r) { return r.r2 ? fmt::format("{:.4f}", *r.r2) : std::string("n/a"); };
  out << fmt::format("{:<20}{:>12}{:>12}\n", "Metric", "Train", "Test");
  out << fmt::format("{:<20}{:>12.4f}{:>12.4f}\n", "MAE [MW]", a.mae, b.mae);
  out << fmt::format("{:<20}{:>12.4f}{:>12.4f}\n", "RMSE [MW]", a.rmse, b.rmse);
  out << fmt::format("{:<20}{:>12}{:>12}\n", "R2", r2(a), r2(b));
  out << fmt::format("{:<20}{:>12.3f}{:>12.3f}\n", "SMAPE [%]", a.smape, b.smape);
  out << fmt::format("{:<20}{:>12.4f}{:>12.4f}\n", "WAPE", a.wape, b.wape);
  out << fmt::format("{:<20}{:>12.4f}{:>12.4f}\n", "RMSLE", a.rmsle, b.rmsle);
  out << fmt::format("{:<20}{:>12.5f}{:>12.5f}\n", "PUE MAE", a.pue_mae, b.pue_mae);
  out << fmt::format("{:<20}{:>12.5f}{:>12.5f}\n", "PUE RMSE", a.pue_rmse, b.pue_rmse);
  out << fmt::format("{:<20}{:>12.4f}{:>12.4f}\n", "PUE within +-0.01", a.pue_within_001, b.pue_within_001);
  out << fmt::format("{:<20}{:>12}{:>12}\n", "rows", a.count, b.count);
}

void cmd_synth(const GlobalOptions& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const auto scenario = generate_scenario(cfg.synth);
  const auto& dir = cfg.paths.output_dir;
  write_telemetry_csv(dir / "telemetry.csv", scenario.dataset.records);
  write_sidecar_csv(dir / "sidecar.csv", scenario.sidecar);
  out << fmt::format("synth: {} intervals written to {}\n", scenario.dataset.records.size(),
                     (dir / "telemetry.csv").string());
  out << fmt::format("synth: injected excess {:.6f} MWh over {} episodes\n", injected_excess_energy(cfg.synth),
                     cfg.synth.episodes.size());
}

void cmd_train(const GlobalOptions& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const auto model_path = cfg.paths.model_or_default();
  if (fs::exists(model_path) && !g.force)
    throw Error(ErrorCode::OutputExists, "model artifact " + model_path.string() + " exists; pass --force to replace it");
  const auto data = load_dataset(cfg, out, true);
  const auto model = train_surrogate(data, cfg.surrogate);
  save_model(model_path, model);
  write_metrics_csv(cfg.paths.output_dir / "metrics.csv", model);
  out << fmt::format("train: {} train rows, {} test rows, {} trees -> {}\n", model.train_rows, model.test_rows,
                     model.selected_trees, model_path.string());
  print_metrics(out, model);
}

void cmd_excess(const GlobalOptions& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const auto model = load_model(cfg.paths.model_or_default());
  const auto data = load_dataset(cfg, out, false);
  const auto series = compute_excess(data, model, cfg.tariff);
  const auto views = aggregate_views(series);
  const auto& dir = cfg.paths.output_dir;
  write_excess_csv(cfg.paths.excess_or_default(), series);
  write_period_csv(dir / "excess_daily.csv", views.daily, "date");
  write_period_csv(dir / "excess_monthly.csv", views.monthly, "month");
  write_period_csv(dir / "excess_regime.csv", views.regime, "regime");
  write_period_csv(dir / "excess_weekday.csv", views.weekday, "weekday");
  write_hour_month_csv(dir / "excess_hour_month.csv", views);
  out << fmt::format("excess: {:.6f} MWh, ${:.2f} energy cost over {} intervals\n", series.total_energy(),
                     series.total_cost(), series.intervals.size());
  if (cfg.tariff.demand_rate) {
    const auto demand = demand_charge(series, *cfg.tariff.demand_rate);
    write_demand_csv(dir / "demand_charge.csv", demand);
    out << fmt::format("excess: demand charge ${:.2f}\n", demand.total);
  }
}

void cmd_cfsearch(const GlobalOptions& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const auto model = load_model(cfg.paths.model_or_default());
  const auto data = load_dataset(cfg, out, false);
  const auto ledger = run_counterfactual(data, model, cfg.tariff, cfg.counterfactual);
  const auto& dir = cfg.paths.output_dir;
  write_ledger_csv(cfg.paths.ledger_or_default(), ledger);
  write_savings_groups_csv(dir / "savings_month.csv", ledger.by_month, "month");
  write_savings_groups_csv(dir / "savings_hour.csv", ledger.by_hour, "hour");
  write_savings_groups_csv(dir / "savings_regime.csv", ledger.by_regime, "regime");
  write_savings_groups_csv(dir / "savings_loop.csv", ledger.by_loop, "dominant_loop");
  std::size_t breaches = 0;
  for (auto b : ledger.breaches) breaches += b;
  out << fmt::format("cfsearch: {} intervals x {} actions, saving {:.6f} MWh (${:.2f}), guardrail breaches {}\n",
                     ledger.entries.size(), enumerate_actions(cfg.counterfactual.grid).size(),
                     ledger.total_energy(), ledger.total_cost(), breaches);
}

void cmd_review(const GlobalOptions& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const auto model = load_model(cfg.paths.model_or_default());
  const auto ledger = read_ledger_csv(cfg.paths.ledger_or_default());
  const auto excess = read_excess_csv(cfg.paths.excess_or_default());
  const auto review_cfg = cfg.review.resolve(model);
  const auto report = build_review(ledger, excess, review_cfg);
  const auto& dir = cfg.paths.output_dir;
  write_action_log_csv(dir / "action_log.csv", report);
  write_review_summary(dir / "review_summary.csv", report, review_cfg);
  std::size_t breaches = 0;
  for (auto b : report.breaches) breaches += b;
  out << fmt::format("review: excess {:.6f} MWh; raw {:.6f}, capped {:.6f}, reviewer-pass {:.6f} MWh\n",
                     report.excess_energy, report.raw.energy, report.capped.energy, report.reviewer_capped.energy);
  out << fmt::format("review: capture {:.4f} (capped), action frequency {:.4f}, guardrail breaches {}\n",
                     report.capture_capped, report.action_frequency, breaches);
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::OutputExists:
      return kExitUsage;
    default:
      return kExitData;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cooling accessory-power analytics: synthetic telemetry, surrogate training, excess "
               "monitoring, counterfactual search and review."};
  app.name("coolopt");
  app.require_subcommand(1, 1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration (missing keys keep their defaults)");
  app.add_option("--out", g.out, "Output directory (overrides paths.output_dir)");
  app.add_option("--threads", g.threads, "Worker thread cap (default: all cores)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Override every seed in the configuration");
  app.add_flag("--force", g.force, "Allow train to replace an existing model artifact");
  app.footer("Default configuration:\n" + dump_run_config(RunConfig{}));

  using Command = void (*)(const GlobalOptions&, std::ostream&);
  std::vector<std::pair<CLI::App*, Command>> commands{
      {app.add_subcommand("synth", "Generate synthetic telemetry and its ground-truth sidecar"), cmd_synth},
      {app.add_subcommand("train", "Train the calibrated surrogate and write the model artifact"), cmd_train},
      {app.add_subcommand("excess", "Score telemetry against the surrogate and aggregate excess"), cmd_excess},
      {app.add_subcommand("cfsearch", "Guardrailed counterfactual grid search; writes the savings ledger"),
       cmd_cfsearch},
      {app.add_subcommand("review", "Reviewer diagnostics over the ledger and excess series"), cmd_review},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: Usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    std::unique_ptr<tbb::global_control> limit;
    if (g.threads > 0)
      limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                    static_cast<std::size_t>(g.threads));
    for (const auto& [sub, run] : commands)
      if (sub->parsed()) run(g, out);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << one_line(e.what()) << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: Internal: " << one_line(e.what()) << '\n';
    return kExitInternal;
  }
}

}  // namespace coolopt

#include "coolopt/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "coolopt/csv.hpp"
#include "coolopt/error.hpp"
#include "json.hpp"

namespace coolopt {

using nlohmann::json;

namespace {

constexpr int kArtifactVersion = 1;

PercentileBand band(const FeatureMatrix& X, std::span<const std::size_t> rows, std::size_t col,
                    const char* name) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (auto r : rows) v.push_back(X.at(r, col));
  PercentileBand b{percentile(v, 0.01), percentile(std::move(v), 0.99)};
  if (!(b.p1 < b.p99))
    throw Error(ErrorCode::DegenerateData,
                std::string("training distribution of ") + name + " has p1 == p99");
  return b;
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::LengthMismatch, "percentile of empty set");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void fill_regimes(FeatureMatrix& matrix, const FeatureLayout& layout, const RegimeModel& regimes) {
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    auto row = matrix.row(i);
    write_regime(row, layout, assign_regime(regimes, row[layout.q_tot], row[layout.t_sup]));
  }
}

FeatureMatrix surrogate_features(const SurrogateModel& model, const CleanDataset& dataset) {
  auto X = build_feature_matrix(dataset, model.schema, model.feature_config);
  fill_regimes(X, FeatureLayout::resolve(model.schema), model.regimes);
  return X;
}

double predict_accessory_power(const SurrogateModel& model, std::span<const double> row) {
  return std::max(0.0, apply_isotonic(model.calibrator, model.ensemble.predict(row)));
}

double implied_pue(double p_it, double p_acc) {
  if (!(p_it > 0.0)) throw Error(ErrorCode::NonPositiveItPower, "p_it must be > 0");
  return std::max(1.0, (p_it + p_acc) / p_it);
}

double pue_within_fraction(std::span<const double> actual, std::span<const double> predicted,
                           std::span<const double> p_it, double tolerance) {
  if (actual.size() != predicted.size() || actual.size() != p_it.size() || actual.empty())
    throw Error(ErrorCode::LengthMismatch, "metric inputs differ in length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < actual.size(); ++i)
    if (std::abs(implied_pue(p_it[i], predicted[i]) - implied_pue(p_it[i], actual[i])) <= tolerance)
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(actual.size());
}

MetricReport evaluate_metrics(std::span<const double> actual, std::span<const double> predicted,
                              std::span<const double> p_it) {
  const std::size_t n = actual.size();
  if (n < 2 || predicted.size() != n || p_it.size() != n)
    throw Error(ErrorCode::LengthMismatch, "metric inputs must have equal length >= 2");
  MetricReport m;
  m.count = n;
  double abs_sum = 0, sq_sum = 0, y_sum = 0, y_abs_sum = 0, smape_sum = 0, log_sq = 0;
  double pue_abs = 0, pue_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = predicted[i] - actual[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    y_sum += actual[i];
    y_abs_sum += std::abs(actual[i]);
    const double denom = std::abs(actual[i]) + std::abs(predicted[i]);
    if (denom > 0.0) smape_sum += 2.0 * std::abs(e) / denom;
    const double le = std::log1p(predicted[i]) - std::log1p(actual[i]);
    log_sq += le * le;
    const double pe = implied_pue(p_it[i], predicted[i]) - implied_pue(p_it[i], actual[i]);
    pue_abs += std::abs(pe);
    pue_sq += pe * pe;
  }
  const double dn = static_cast<double>(n);
  m.mae = abs_sum / dn;
  m.rmse = std::sqrt(sq_sum / dn);
  m.smape = 100.0 * smape_sum / dn;
  m.wape = y_abs_sum > 0.0 ? abs_sum / y_abs_sum : (abs_sum > 0.0 ? INFINITY : 0.0);
  m.rmsle = std::sqrt(log_sq / dn);
  m.pue_mae = pue_abs / dn;
  m.pue_rmse = std::sqrt(pue_sq / dn);
  m.pue_within_001 = pue_within_fraction(actual, predicted, p_it, 0.01);
  const double mean = y_sum / dn;
  double sst = 0.0;
  for (double y : actual) sst += (y - mean) * (y - mean);
  if (sst > 0.0) m.r2 = 1.0 - sq_sum / sst;
  return m;
}

SurrogateModel train_surrogate(const CleanDataset& dataset, const SurrogateConfig& cfg,
                               SurrogateTrainingDetails* details) {
  cfg.train.validate();
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "test_fraction must be in (0, 1)");

  SurrogateModel model;
  model.feature_config = cfg.features;
  model.schema = make_feature_schema(cfg.features);
  model.train_config = cfg.train;
  model.test_fraction = cfg.test_fraction;
  model.split_seed = cfg.split_seed;
  model.regime_seed = cfg.regime_seed;

  FeatureMatrix X = build_feature_matrix(dataset, model.schema, cfg.features);
  const auto layout = FeatureLayout::resolve(model.schema);

  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < X.rows; ++i)
    if (X.trainable[i]) trainable.push_back(i);
  if (trainable.size() < cfg.min_trainable_rows)
    throw Error(ErrorCode::TooFewSamples, "need at least " + std::to_string(cfg.min_trainable_rows) +
                                              " trainable rows, got " +
                                              std::to_string(trainable.size()));

  // Seeded Fisher-Yates so the split does not depend on the standard library.
  std::mt19937_64 rng(cfg.split_seed);
  std::vector<std::size_t> shuffled = trainable;
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng() % i]);
  const auto n_test = static_cast<std::size_t>(
      std::llround(cfg.test_fraction * static_cast<double>(shuffled.size())));
  std::vector<std::size_t> test(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(shuffled.begin() + static_cast<std::ptrdiff_t>(n_test), shuffled.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());

  std::vector<RegimePoint> points;
  points.reserve(train.size());
  for (auto r : train) points.push_back({X.at(r, layout.q_tot), X.at(r, layout.t_sup)});
  model.regimes = fit_regimes(points, cfg.regime_seed);
  fill_regimes(X, layout, model.regimes);

  FeatureMatrix X_train;
  X_train.rows = train.size();
  X_train.cols = X.cols;
  X_train.values.reserve(train.size() * X.cols);
  std::vector<double> y_train;
  y_train.reserve(train.size());
  for (auto r : train) {
    const auto row = X.row(r);
    X_train.values.insert(X_train.values.end(), row.begin(), row.end());
    y_train.push_back(dataset.records[r].p_acc);
  }
  X_train.trainable.assign(train.size(), true);

  TrainingReport booster;
  model.ensemble = fit_ensemble(X_train, y_train, model.schema, cfg.train, &booster);
  model.selected_trees = booster.selected_trees;

  std::vector<double> raw(train.size());
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, train.size(), 1024),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (auto i = r.begin(); i != r.end(); ++i)
                        raw[i] = model.ensemble.predict(X_train.row(i));
                    });
  model.calibrator = fit_isotonic(raw, y_train);

  model.percentiles.t_sup = band(X, train, layout.t_sup, "t_sup");
  model.percentiles.q_tot = band(X, train, layout.q_tot, "q_tot");
  model.percentiles.mean_delta_t = band(X, train, layout.mean_delta_t, "mean_delta_t");
  model.percentiles.q_tot_heat = band(X, train, layout.q_tot_heat, "q_tot_heat");
  model.t_sup_max_observed = -INFINITY;
  for (auto r : train) model.t_sup_max_observed = std::max(model.t_sup_max_observed, X.at(r, layout.t_sup));

  auto score = [&](const std::vector<std::size_t>& rows) {
    std::vector<double> actual(rows.size()), pred(rows.size()), pit(rows.size());
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, rows.size(), 1024),
                      [&](const tbb::blocked_range<std::size_t>& r) {
                        for (auto i = r.begin(); i != r.end(); ++i) {
                          pred[i] = predict_accessory_power(model, X.row(rows[i]));
                          actual[i] = dataset.records[rows[i]].p_acc;
                          pit[i] = dataset.records[rows[i]].p_it;
                        }
                      });
    return evaluate_metrics(actual, pred, pit);
  };
  model.train_rows = train.size();
  model.test_rows = test.size();
  model.train_metrics = score(train);
  model.test_metrics = n_test >= 2 ? score(test) : MetricReport{};

  if (details) {
    details->features = std::move(X);
    details->train_rows = std::move(train);
    details->test_rows = std::move(test);
    details->booster = std::move(booster);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Artifact serialization

namespace {

json bound_to_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }
double bound_from_json(const json& j, double inf) { return j.is_null() ? inf : j.get<double>(); }

json tree_to_json(const Tree& t) {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), value = json::array(), lower = json::array(), upper = json::array(),
       samples = json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    lower.push_back(bound_to_json(n.lower));
    upper.push_back(bound_to_json(n.upper));
    samples.push_back(n.samples);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},   {"right", right},
          {"value", value},     {"lower", lower},         {"upper", upper}, {"samples", samples}};
}

Tree tree_from_json(const json& j) {
  Tree t;
  const auto& feature = j.at("feature");
  t.nodes.resize(feature.size());
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    auto& n = t.nodes[i];
    n.feature = feature[i].get<int>();
    n.threshold = j.at("threshold")[i].get<double>();
    n.left = j.at("left")[i].get<int>();
    n.right = j.at("right")[i].get<int>();
    n.value = j.at("value")[i].get<double>();
    n.lower = bound_from_json(j.at("lower")[i], -INFINITY);
    n.upper = bound_from_json(j.at("upper")[i], INFINITY);
    n.samples = j.at("samples")[i].get<int>();
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(n.left) >= t.nodes.size() ||
                         static_cast<std::size_t>(n.right) >= t.nodes.size()))
      throw Error(ErrorCode::ArtifactError, "tree child index out of range");
  }
  return t;
}

json metrics_to_json(const MetricReport& m) {
  return {{"count", m.count},
          {"mae", m.mae},
          {"rmse", m.rmse},
          {"r2", m.r2 ? json(*m.r2) : json(nullptr)},
          {"smape", m.smape},
          {"wape", m.wape},
          {"rmsle", m.rmsle},
          {"pue_mae", m.pue_mae},
          {"pue_rmse", m.pue_rmse},
          {"pue_within_001", m.pue_within_001}};
}

MetricReport metrics_from_json(const json& j) {
  MetricReport m;
  m.count = j.at("count").get<std::size_t>();
  m.mae = j.at("mae").get<double>();
  m.rmse = j.at("rmse").get<double>();
  if (!j.at("r2").is_null()) m.r2 = j.at("r2").get<double>();
  m.smape = j.at("smape").get<double>();
  m.wape = j.at("wape").get<double>();
  m.rmsle = j.at("rmsle").get<double>();
  m.pue_mae = j.at("pue_mae").get<double>();
  m.pue_rmse = j.at("pue_rmse").get<double>();
  m.pue_within_001 = j.at("pue_within_001").get<double>();
  return m;
}

json band_to_json(const PercentileBand& b) { return {{"p1", b.p1}, {"p99", b.p99}}; }
PercentileBand band_from_json(const json& j) { return {j.at("p1").get<double>(), j.at("p99").get<double>()}; }

}  // namespace

void save_model(const std::filesystem::path& path, const SurrogateModel& m) {
  json j;
  j["format"] = "coolopt-surrogate";
  j["format_version"] = kArtifactVersion;
  j["feature_config"] = {{"lags", m.feature_config.lags},
                         {"windows", m.feature_config.windows},
                         {"low_load_threshold", m.feature_config.low_load_threshold},
                         {"c_w", m.feature_config.c_w},
                         {"regime_one_hot", m.feature_config.regime_one_hot}};
  j["schema"] = {{"names", m.schema.names}, {"monotone", m.schema.monotone}, {"units", m.schema.units}};
  const auto& t = m.train_config;
  j["train_config"] = {{"learning_rate", t.learning_rate},
                       {"max_leaves", t.max_leaves},
                       {"max_trees", t.max_trees},
                       {"early_stopping_rounds", t.early_stopping_rounds},
                       {"min_samples_leaf", t.min_samples_leaf},
                       {"histogram_bins", t.histogram_bins},
                       {"validation_fraction", t.validation_fraction},
                       {"seed", t.seed},
                       {"exact_splits", t.exact_splits},
                       {"min_split_gain", t.min_split_gain}};
  json trees = json::array();
  for (const auto& tree : m.ensemble.trees()) trees.push_back(tree_to_json(tree));
  j["ensemble"] = {{"base_score", m.ensemble.base_score()},
                   {"learning_rate", m.ensemble.learning_rate()},
                   {"monotone", m.ensemble.monotone()},
                   {"trees", trees}};
  j["calibrator"] = {{"knots_x", m.calibrator.knots_x},
                     {"knots_y", m.calibrator.knots_y},
                     {"fit_on", "training_split"}};
  j["regimes"] = {{"centroids", m.regimes.centroids},
                  {"mean", m.regimes.mean},
                  {"stddev", m.regimes.stddev},
                  {"label_order", m.regimes.label_order}};
  j["percentiles"] = {{"t_sup", band_to_json(m.percentiles.t_sup)},
                      {"q_tot", band_to_json(m.percentiles.q_tot)},
                      {"mean_delta_t", band_to_json(m.percentiles.mean_delta_t)},
                      {"q_tot_heat", band_to_json(m.percentiles.q_tot_heat)}};
  j["t_sup_max_observed"] = m.t_sup_max_observed;
  j["split"] = {{"test_fraction", m.test_fraction},
                {"split_seed", m.split_seed},
                {"regime_seed", m.regime_seed},
                {"train_rows", m.train_rows},
                {"test_rows", m.test_rows},
                {"early_stopping_slice", "last validation_fraction of training rows in time order"}};
  j["selected_trees"] = m.selected_trees;
  j["metrics"] = {{"train", metrics_to_json(m.train_metrics)}, {"test", metrics_to_json(m.test_metrics)}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

SurrogateModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model artifact: " + path.string());
  SurrogateModel m;
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != "coolopt-surrogate")
      throw Error(ErrorCode::ArtifactError, "not a surrogate artifact: " + path.string());
    if (j.at("format_version").get<int>() != kArtifactVersion)
      throw Error(ErrorCode::ArtifactError, "unsupported artifact version");

    const auto& fc = j.at("feature_config");
    m.feature_config.lags = fc.at("lags").get<std::vector<int>>();
    m.feature_config.windows = fc.at("windows").get<std::vector<int>>();
    m.feature_config.low_load_threshold = fc.at("low_load_threshold").get<double>();
    m.feature_config.c_w = fc.at("c_w").get<double>();
    m.feature_config.regime_one_hot = fc.at("regime_one_hot").get<bool>();
    const auto& sc = j.at("schema");
    m.schema.names = sc.at("names").get<std::vector<std::string>>();
    m.schema.monotone = sc.at("monotone").get<std::vector<int>>();
    m.schema.units = sc.at("units").get<std::vector<std::string>>();
    if (!(m.schema == make_feature_schema(m.feature_config)))
      throw Error(ErrorCode::SchemaMismatch, "artifact schema does not match its feature config");

    const auto& tc = j.at("train_config");
    auto& t = m.train_config;
    t.learning_rate = tc.at("learning_rate").get<double>();
    t.max_leaves = tc.at("max_leaves").get<int>();
    t.max_trees = tc.at("max_trees").get<int>();
    t.early_stopping_rounds = tc.at("early_stopping_rounds").get<int>();
    t.min_samples_leaf = tc.at("min_samples_leaf").get<int>();
    t.histogram_bins = tc.at("histogram_bins").get<int>();
    t.validation_fraction = tc.at("validation_fraction").get<double>();
    t.seed = tc.at("seed").get<std::uint64_t>();
    t.exact_splits = tc.at("exact_splits").get<bool>();
    t.min_split_gain = tc.at("min_split_gain").get<double>();

    const auto& e = j.at("ensemble");
    std::vector<Tree> trees;
    for (const auto& tj : e.at("trees")) trees.push_back(tree_from_json(tj));
    auto monotone = e.at("monotone").get<std::vector<int>>();
    if (monotone != m.schema.monotone)
      throw Error(ErrorCode::SchemaMismatch, "ensemble constraints differ from schema");
    m.ensemble = BoostedEnsemble(e.at("base_score").get<double>(), e.at("learning_rate").get<double>(),
                                 std::move(monotone), std::move(trees));

    m.calibrator.knots_x = j.at("calibrator").at("knots_x").get<std::vector<double>>();
    m.calibrator.knots_y = j.at("calibrator").at("knots_y").get<std::vector<double>>();
    if (m.calibrator.knots_x.empty() || m.calibrator.knots_x.size() != m.calibrator.knots_y.size())
      throw Error(ErrorCode::ArtifactError, "malformed calibrator");

    const auto& rj = j.at("regimes");
    m.regimes.centroids = rj.at("centroids").get<decltype(m.regimes.centroids)>();
    m.regimes.mean = rj.at("mean").get<std::array<double, 2>>();
    m.regimes.stddev = rj.at("stddev").get<std::array<double, 2>>();
    m.regimes.label_order = rj.at("label_order").get<std::array<int, kRegimeCount>>();

    const auto& pj = j.at("percentiles");
    m.percentiles.t_sup = band_from_json(pj.at("t_sup"));
    m.percentiles.q_tot = band_from_json(pj.at("q_tot"));
    m.percentiles.mean_delta_t = band_from_json(pj.at("mean_delta_t"));
    m.percentiles.q_tot_heat = band_from_json(pj.at("q_tot_heat"));
    m.t_sup_max_observed = j.at("t_sup_max_observed").get<double>();

    const auto& sp = j.at("split");
    m.test_fraction = sp.at("test_fraction").get<double>();
    m.split_seed = sp.at("split_seed").get<std::uint64_t>();
    m.regime_seed = sp.at("regime_seed").get<std::uint64_t>();
    m.train_rows = sp.at("train_rows").get<std::size_t>();
    m.test_rows = sp.at("test_rows").get<std::size_t>();
    m.selected_trees = j.at("selected_trees").get<std::size_t>();
    m.train_metrics = metrics_from_json(j.at("metrics").at("train"));
    m.test_metrics = metrics_from_json(j.at("metrics").at("test"));
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ArtifactError, path.string() + ": " + ex.what());
  }
  return m;
}

void write_metrics_csv(const std::filesystem::path& path, const SurrogateModel& model) {
  csv::Writer w(path);
  w.row({"metric", "train", "test"});
  const auto& a = model.train_metrics;
  const auto& b = model.test_metrics;
  auto f = [](double v) { return csv::format_double(v); };
  auto r2 = [](const MetricReport& m) { return m.r2 ? csv::format_double(*m.r2) : std::string{}; };
  w.row({"MAE [MW]", f(a.mae), f(b.mae)});
  w.row({"RMSE [MW]", f(a.rmse), f(b.rmse)});
  w.row({"R2", r2(a), r2(b)});
  w.row({"SMAPE [%]", f(a.smape), f(b.smape)});
  w.row({"WAPE", f(a.wape), f(b.wape)});
  w.row({"RMSLE", f(a.rmsle), f(b.rmsle)});
  w.row({"PUE MAE", f(a.pue_mae), f(b.pue_mae)});
  w.row({"PUE RMSE", f(a.pue_rmse), f(b.pue_rmse)});
  w.row({"PUE within +-0.01", f(a.pue_within_001), f(b.pue_within_001)});
  w.row({"rows", std::to_string(a.count), std::to_string(b.count)});
  w.close();
}

}  // namespace coolopt

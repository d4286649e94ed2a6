#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "coolopt/isotonic.hpp"
#include "coolopt/monotone_gbt.hpp"
#include "coolopt/physics_features.hpp"
#include "coolopt/regime_model.hpp"

namespace coolopt {

struct SurrogateConfig {
  FeatureConfig features;
  TrainConfig train;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 42;
  std::uint64_t regime_seed = 42;
  std::size_t min_trainable_rows = 1000;
};

struct PercentileBand {
  double p1 = 0.0;
  double p99 = 0.0;

  bool contains(double v) const { return v >= p1 && v <= p99; }
  bool operator==(const PercentileBand&) const = default;
};

/// 1st/99th percentiles of the training rows for the features the reviewer
/// checks counterfactual states against.
struct TrainPercentiles {
  PercentileBand t_sup, q_tot, mean_delta_t, q_tot_heat;
  bool operator==(const TrainPercentiles&) const = default;
};

struct MetricReport {
  std::size_t count = 0;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;  // absent for a zero-variance target
  double smape = 0.0;        // percent
  double wape = 0.0;
  double rmsle = 0.0;
  double pue_mae = 0.0;
  double pue_rmse = 0.0;
  double pue_within_001 = 0.0;

  bool operator==(const MetricReport&) const = default;
};

struct SurrogateModel {
  FeatureConfig feature_config;
  FeatureSchema schema;
  TrainConfig train_config;
  BoostedEnsemble ensemble;
  IsotonicMap calibrator;
  RegimeModel regimes;
  TrainPercentiles percentiles;
  double t_sup_max_observed = 0.0;  // max training t_sup
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::uint64_t regime_seed = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t selected_trees = 0;
  MetricReport train_metrics;
  MetricReport test_metrics;

  bool operator==(const SurrogateModel&) const = default;
};

/// By-products of training kept for audit and tests.
struct SurrogateTrainingDetails {
  FeatureMatrix features;  // full dataset, regime columns filled
  std::vector<std::size_t> train_rows;  // dataset indices, time order
  std::vector<std::size_t> test_rows;
  TrainingReport booster;
};

/// Builds features, splits trainable rows at random into train/test, fits the
/// regime model and booster on train, calibrates on the train split, and scores
/// both splits.
SurrogateModel train_surrogate(const CleanDataset& dataset, const SurrogateConfig& cfg,
                               SurrogateTrainingDetails* details = nullptr);

/// Features for `dataset` under `model`'s schema, with regimes assigned.
FeatureMatrix surrogate_features(const SurrogateModel& model, const CleanDataset& dataset);

void fill_regimes(FeatureMatrix& matrix, const FeatureLayout& layout, const RegimeModel& regimes);

/// Calibrated accessory power, floored at 0 MW.
double predict_accessory_power(const SurrogateModel& model, std::span<const double> row);

/// max(1, (p_it + p_acc) / p_it). Throws NonPositiveItPower when p_it <= 0.
double implied_pue(double p_it, double p_acc);

MetricReport evaluate_metrics(std::span<const double> actual, std::span<const double> predicted,
                              std::span<const double> p_it);

/// Fraction of points whose implied PUE differs by at most `tolerance`.
double pue_within_fraction(std::span<const double> actual, std::span<const double> predicted,
                           std::span<const double> p_it, double tolerance);

/// Linear-interpolation percentile (q in [0, 1]) of unsorted values.
double percentile(std::vector<double> values, double q);

void save_model(const std::filesystem::path& path, const SurrogateModel& model);
SurrogateModel load_model(const std::filesystem::path& path);

void write_metrics_csv(const std::filesystem::path& path, const SurrogateModel& model);

}  // namespace coolopt

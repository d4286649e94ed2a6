#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coolopt/telemetry.hpp"

namespace coolopt {

/// rho * c_p of water in MW per (L/s * K).
inline constexpr double kWaterHeatCapacity = 0.004186;

double loop_lift(double t_ret, double t_sup);
double loop_heat(double q, double delta_t, double c_w = kWaterHeatCapacity);
/// Share of positive heat carried by the dominant loop; 0 when no loop carries heat.
double imbalance_index(const std::array<double, kLoopCount>& q_heat);
/// Loop with the largest heat; ties resolve to the lowest index.
int dominant_loop(const std::array<double, kLoopCount>& q_heat);

/// Physics-derived quantities for one operating point.
struct PhysicsState {
  std::array<double, kLoopCount> delta_t{};
  std::array<double, kLoopCount> q_heat{};
  double q_tot = 0.0;
  double q_tot_heat = 0.0;
  double q_tot_cubed = 0.0;
  double imbalance = 0.0;
  double mean_delta_t = 0.0;
  double interact_pit_tsup = 0.0;
  double interact_qtot_dt = 0.0;
};

/// Lifts are floored at `lift_floor` when given (counterfactual context only).
PhysicsState compute_physics(double p_it, double t_sup, const std::array<double, kLoopCount>& t_ret,
                             const std::array<double, kLoopCount>& q, double c_w,
                             std::optional<double> lift_floor = std::nullopt);

struct FeatureConfig {
  std::vector<int> lags{1, 3, 6};
  std::vector<int> windows{6, 36};
  double low_load_threshold = 10.0;  // MW
  double c_w = kWaterHeatCapacity;
  bool regime_one_hot = false;

  bool operator==(const FeatureConfig&) const = default;
};

struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<int> monotone;  // +1 or 0 per feature
  std::vector<std::string> units;

  std::size_t size() const { return names.size(); }
  std::optional<std::size_t> index_of(const std::string& name) const;
  bool operator==(const FeatureSchema&) const = default;
};

FeatureSchema make_feature_schema(const FeatureConfig& cfg);

/// Resolved column positions of the fields the counterfactual engine rewrites.
struct FeatureLayout {
  std::size_t p_it, t_sup;
  std::array<std::size_t, kLoopCount> t_ret, q, delta_t, q_heat;
  std::size_t q_tot, q_tot_heat, q_tot_cubed, imbalance, mean_delta_t;
  std::size_t interact_pit_tsup, interact_qtot_dt;
  std::size_t hour, month, low_load;
  std::vector<std::size_t> regime;  // one column, or three indicator columns

  static FeatureLayout resolve(const FeatureSchema& schema);
};

void write_physics(std::span<double> row, const FeatureLayout& layout, const PhysicsState& s);
void write_regime(std::span<double> row, const FeatureLayout& layout, int regime);

struct HistoryFeatures {
  std::vector<std::vector<double>> lagged;   // per lag; NaN when absent
  std::vector<std::vector<double>> rolling;  // per window
  std::vector<bool> lag1_present;
};

/// Lags and trailing rolling means on the 10-minute grid. `slots` gives each
/// value's grid position so gaps are respected; lag k at t is the value at
/// slot t-k and the rolling mean over w averages available values in (t-w, t].
HistoryFeatures history_features(std::span<const double> values,
                                 std::span<const std::int64_t> slots,
                                 std::span<const int> lags, std::span<const int> windows);
/// Contiguous-series overload.
HistoryFeatures history_features(std::span<const double> values, std::span<const int> lags,
                                 std::span<const int> windows);

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  std::vector<bool> trainable;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// One row per record, schema column order. Regime columns are left NaN for
/// the regime model to fill. Rows without a lag-1 value are not trainable.
FeatureMatrix build_feature_matrix(const CleanDataset& dataset, const FeatureSchema& schema,
                                   const FeatureConfig& cfg);

void write_feature_matrix_csv(const std::filesystem::path& path, const FeatureMatrix& matrix,
                              const FeatureSchema& schema, const CleanDataset& dataset);

}  // namespace coolopt

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace coolopt {

inline constexpr int kRegimeCount = 3;

struct RegimePoint {
  double q_tot = 0.0;
  double t_sup = 0.0;
};

/// Three-cluster labeler over standardized (q_tot, t_sup). Centroids are
/// stored by regime id, which ascends with centroid q_tot.
struct RegimeModel {
  std::array<std::array<double, 2>, kRegimeCount> centroids{};  // standardized
  std::array<double, 2> mean{};
  std::array<double, 2> stddev{1.0, 1.0};
  std::array<int, kRegimeCount> label_order{0, 1, 2};  // k-means cluster -> regime id

  bool operator==(const RegimeModel&) const = default;
};

struct RegimeFitReport {
  std::vector<double> wcss;  // within-cluster sum of squares after each assignment step
  int iterations = 0;
  std::vector<int> labels;   // final regime id per input point
};

struct KMeansOptions {
  double tolerance = 1e-6;
  int max_iterations = 100;
};

/// k-means++ seeded Lloyd iterations. Throws DegenerateData with fewer than
/// three distinct points.
RegimeModel fit_regimes(std::span<const RegimePoint> points, std::uint64_t seed,
                        RegimeFitReport* report = nullptr, const KMeansOptions& options = {});

/// Nearest centroid in standardized space; ties go to the lowest regime id.
int assign_regime(const RegimeModel& model, double q_tot, double t_sup);

/// Centroid of `regime` in original units.
RegimePoint regime_centroid(const RegimeModel& model, int regime);

}  // namespace coolopt

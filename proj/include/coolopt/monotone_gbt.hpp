#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "coolopt/physics_features.hpp"

namespace coolopt {

struct TrainConfig {
  double learning_rate = 0.05;
  int max_leaves = 31;
  int max_trees = 2000;
  int early_stopping_rounds = 50;
  int min_samples_leaf = 20;
  int histogram_bins = 256;
  double validation_fraction = 0.1;
  std::uint64_t seed = 42;
  /// One bin per distinct value instead of quantile bins (small data, oracle tests).
  bool exact_splits = false;
  double min_split_gain = 1e-12;

  /// Throws InvalidConfig.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output before the learning rate
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  int samples = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Binary regression tree. Routing: left iff value <= threshold; NaN goes left.
struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const;
  std::size_t leaf_count() const;
  bool operator==(const Tree&) const = default;
};

/// Immutable boosted ensemble:
/// prediction = base_score + sum over trees of learning_rate * tree(x).
class BoostedEnsemble {
 public:
  BoostedEnsemble() = default;
  BoostedEnsemble(double base_score, double learning_rate, std::vector<int> monotone,
                  std::vector<Tree> trees);

  /// Throws FeatureCountMismatch when the row width differs from feature_count().
  double predict(std::span<const double> row) const;

  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<int>& monotone() const { return monotone_; }
  std::size_t feature_count() const { return monotone_.size(); }
  const std::vector<Tree>& trees() const { return trees_; }

  bool operator==(const BoostedEnsemble& o) const {
    return base_score_ == o.base_score_ && learning_rate_ == o.learning_rate_ &&
           monotone_ == o.monotone_ && trees_ == o.trees_;
  }

 private:
  // Children of an internal node sit at `child` and `child + 1`.
  struct FlatNode {
    double value;  // threshold, or learning_rate * leaf value
    std::int32_t feature;
    std::int32_t child;
  };

  double base_score_ = 0.0;
  double learning_rate_ = 0.0;
  std::vector<int> monotone_;
  std::vector<Tree> trees_;
  std::vector<FlatNode> flat_;
  std::vector<std::int32_t> roots_;
};

struct TrainingReport {
  std::vector<double> train_rmse;  // index k: after k trees (0 = base score only)
  std::vector<double> valid_rmse;
  std::size_t selected_trees = 0;
  std::size_t fit_rows = 0;
  std::size_t valid_rows = 0;
  std::vector<int> bins_per_feature;
};

/// Squared-error histogram boosting with leaf-wise growth. The last
/// `validation_fraction` of the rows (rows are taken to be in time order)
/// form the early-stopping slice; the returned ensemble keeps the tree count
/// with the lowest validation RMSE.
BoostedEnsemble fit_ensemble(const FeatureMatrix& X, std::span<const double> y,
                             const FeatureSchema& schema, const TrainConfig& cfg,
                             TrainingReport* report = nullptr);

/// A single tree grown on every row of `X` against `residuals`, without a
/// validation slice or learning rate. Used to inspect split selection.
Tree fit_tree(const FeatureMatrix& X, std::span<const double> residuals, std::span<const int> monotone,
              const TrainConfig& cfg);

/// Randomized probe pairs differing in one +1-constrained feature; returns the
/// number of pairs whose prediction decreases. Base rows come from `reference`
/// and probe values span the reference range of the feature (padded by 10%).
std::size_t check_monotonicity(const BoostedEnsemble& model, const FeatureSchema& schema,
                               std::size_t probes, std::uint64_t seed,
                               const FeatureMatrix& reference);

/// Same, restricted to one feature.
std::size_t check_monotonicity_feature(const BoostedEnsemble& model, std::size_t feature,
                                       std::size_t probes, std::uint64_t seed,
                                       const FeatureMatrix& reference);

}  // namespace coolopt

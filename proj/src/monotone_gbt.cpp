#include "coolopt/monotone_gbt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <string>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "coolopt/error.hpp"

namespace coolopt {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (max_leaves < 2) fail("max_leaves must be >= 2");
  if (max_trees < 1) fail("max_trees must be >= 1");
  if (early_stopping_rounds < 1) fail("early_stopping_rounds must be >= 1");
  if (min_samples_leaf < 1) fail("min_samples_leaf must be >= 1");
  if (histogram_bins < 3 || histogram_bins > 65535) fail("histogram_bins must be in [3, 65535]");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    fail("validation_fraction must be in (0, 1)");
  if (!(min_split_gain >= 0.0)) fail("min_split_gain must be >= 0");
}

double Tree::predict(std::span<const double> row) const {
  int i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = row[n.feature] > n.threshold ? n.right : n.left;  // NaN compares false: left
  }
  return nodes[i].value;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

BoostedEnsemble::BoostedEnsemble(double base_score, double learning_rate, std::vector<int> monotone,
                                 std::vector<Tree> trees)
    : base_score_(base_score),
      learning_rate_(learning_rate),
      monotone_(std::move(monotone)),
      trees_(std::move(trees)) {
  for (const auto& tree : trees_) {
    if (tree.nodes.empty()) throw Error(ErrorCode::ArtifactError, "empty tree");
    const auto base = static_cast<std::int32_t>(flat_.size());
    roots_.push_back(base);
    // Breadth-first relayout so that siblings are adjacent.
    std::deque<int> queue{0};
    flat_.push_back({});
    std::int32_t slot = base;
    while (!queue.empty()) {
      const auto& n = tree.nodes[queue.front()];
      queue.pop_front();
      auto& out = flat_[slot++];
      if (n.is_leaf()) {
        out = {learning_rate_ * n.value, -1, -1};
      } else {
        if (n.feature >= static_cast<int>(monotone_.size()))
          throw Error(ErrorCode::ArtifactError, "tree references feature out of range");
        out = {n.threshold, n.feature, static_cast<std::int32_t>(flat_.size())};
        flat_.push_back({});
        flat_.push_back({});
        queue.push_back(n.left);
        queue.push_back(n.right);
      }
    }
  }
}

double BoostedEnsemble::predict(std::span<const double> row) const {
  if (row.size() != monotone_.size())
    throw Error(ErrorCode::FeatureCountMismatch,
                "row has " + std::to_string(row.size()) + " features, model expects " +
                    std::to_string(monotone_.size()));
  const double* x = row.data();
  const FlatNode* nodes = flat_.data();
  double sum = base_score_;
  for (const auto root : roots_) {
    const FlatNode* n = nodes + root;
    while (n->feature >= 0) n = nodes + n->child + (x[n->feature] > n->value ? 1 : 0);
    sum += n->value;
  }
  return sum;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Upper bin edges: value v falls in bin 1 + (number of cuts < v); bin 0 holds NaN.
std::vector<double> compute_cuts(std::vector<double> values, int max_value_bins, bool exact) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  std::sort(values.begin(), values.end());
  std::vector<double> cuts;
  if (values.empty()) return cuts;
  auto midpoint = [](double a, double b) {
    const double m = a + (b - a) / 2.0;
    return (m >= a && m < b) ? m : a;
  };
  std::vector<double> distinct;
  distinct.reserve(values.size());
  for (double v : values)
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);

  if (exact || static_cast<int>(distinct.size()) <= max_value_bins) {
    for (std::size_t i = 1; i < distinct.size(); ++i)
      cuts.push_back(midpoint(distinct[i - 1], distinct[i]));
    if (cuts.size() > 65533) cuts.resize(65533);
    return cuts;
  }
  const std::size_t n = values.size();
  for (int k = 1; k < max_value_bins; ++k) {
    const std::size_t idx = static_cast<std::size_t>(k) * n / static_cast<std::size_t>(max_value_bins);
    if (idx == 0) continue;
    const double a = values[idx - 1];
    const auto next = std::upper_bound(values.begin(), values.end(), a);
    if (next == values.end()) break;
    const double cut = midpoint(a, *next);
    if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
  }
  return cuts;
}

inline std::uint16_t bin_of(const std::vector<double>& cuts, double v) {
  if (std::isnan(v)) return 0;
  return static_cast<std::uint16_t>(
      1 + (std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin()));
}

struct HistBin {
  double sum = 0.0;
  std::uint32_t count = 0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;  // bins <= bin (and the missing bin) go left
  double left_sum = 0.0, right_sum = 0.0;
  std::uint32_t left_count = 0, right_count = 0;
  double left_out = 0.0, right_out = 0.0;
  bool valid() const { return feature >= 0; }
};

struct Leaf {
  std::size_t begin = 0, end = 0;
  double sum = 0.0;  // residual sum
  std::uint32_t count = 0;
  double lower = -kInf, upper = kInf;
  int node = 0;
  std::vector<HistBin> hist;
  SplitCandidate best;
};

/// Reduction in squared error of a leaf predicting `out` relative to predicting 0.
inline double leaf_objective(double out, double sum, double count) {
  return 2.0 * out * sum - count * out * out;
}

class TreeGrower {
 public:
  TreeGrower(const std::vector<std::uint16_t>& bins, std::size_t n_rows,
             const std::vector<std::vector<double>>& cuts, const std::vector<int>& monotone,
             const TrainConfig& cfg)
      : bins_(bins), n_rows_(n_rows), cuts_(cuts), monotone_(monotone), cfg_(cfg) {
    offsets_.resize(cuts_.size() + 1);
    for (std::size_t f = 0; f < cuts_.size(); ++f)
      offsets_[f + 1] = offsets_[f] + cuts_[f].size() + 2;
  }

  /// Grows one tree on residuals of rows [0, n_fit). Leaves each fit row's
  /// leaf output in `leaf_out`. Returns an empty tree when the root cannot split.
  Tree grow(const std::vector<double>& resid, std::size_t n_fit, std::vector<double>& leaf_out) {
    order_.resize(n_fit);
    for (std::size_t i = 0; i < n_fit; ++i) order_[i] = static_cast<std::uint32_t>(i);
    scratch_.resize(n_fit);

    Tree tree;
    tree.nodes.push_back({});
    std::vector<Leaf> leaves(1);
    Leaf& root = leaves[0];
    root.begin = 0;
    root.end = n_fit;
    for (std::size_t i = 0; i < n_fit; ++i) root.sum += resid[i];
    root.count = static_cast<std::uint32_t>(n_fit);
    build_histogram(root, resid);
    find_best_split(root);
    if (!root.best.valid()) return {};

    while (static_cast<int>(leaves.size()) < cfg_.max_leaves) {
      int pick = -1;
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (!leaves[i].best.valid()) continue;
        if (pick < 0 || leaves[i].best.gain > leaves[pick].best.gain) pick = static_cast<int>(i);
      }
      if (pick < 0) break;
      split(leaves, static_cast<std::size_t>(pick), tree, resid);
    }

    leaf_out.assign(n_fit, 0.0);
    for (const auto& leaf : leaves) {
      auto& node = tree.nodes[leaf.node];
      node.value = std::clamp(leaf.sum / leaf.count, leaf.lower, leaf.upper);
      node.lower = leaf.lower;
      node.upper = leaf.upper;
      node.samples = static_cast<int>(leaf.count);
      for (std::size_t i = leaf.begin; i < leaf.end; ++i) leaf_out[order_[i]] = node.value;
    }
    return tree;
  }

 private:
  void build_histogram(Leaf& leaf, const std::vector<double>& resid) {
    leaf.hist.assign(offsets_.back(), HistBin{});
    const std::size_t n_feat = cuts_.size();
    auto body = [&](std::size_t f) {
      HistBin* h = leaf.hist.data() + offsets_[f];
      const std::uint16_t* col = bins_.data() + f * n_rows_;
      for (std::size_t i = leaf.begin; i < leaf.end; ++i) {
        const auto r = order_[i];
        auto& b = h[col[r]];
        b.sum += resid[r];
        ++b.count;
      }
    };
    if ((leaf.end - leaf.begin) * n_feat < 50000) {
      for (std::size_t f = 0; f < n_feat; ++f) body(f);
    } else {
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n_feat, 1),
                        [&](const tbb::blocked_range<std::size_t>& r) {
                          for (auto f = r.begin(); f != r.end(); ++f) body(f);
                        });
    }
  }

  void find_best_split(Leaf& leaf) const {
    leaf.best = {};
    const double n = leaf.count;
    const double parent_out = std::clamp(leaf.sum / n, leaf.lower, leaf.upper);
    const double parent_obj = leaf_objective(parent_out, leaf.sum, n);
    const auto min_leaf = static_cast<std::uint32_t>(cfg_.min_samples_leaf);
    if (leaf.count < 2 * min_leaf) return;

    for (std::size_t f = 0; f < cuts_.size(); ++f) {
      const HistBin* h = leaf.hist.data() + offsets_[f];
      const int nb = static_cast<int>(cuts_[f].size()) + 2;
      double left_sum = h[0].sum;
      std::uint32_t left_count = h[0].count;
      for (int b = 1; b <= nb - 2; ++b) {
        left_sum += h[b].sum;
        left_count += h[b].count;
        if (h[b].count == 0) continue;  // same partition as the previous threshold
        if (left_count < min_leaf) continue;
        const std::uint32_t right_count = leaf.count - left_count;
        if (right_count < min_leaf) break;
        const double right_sum = leaf.sum - left_sum;
        const double lo = std::clamp(left_sum / left_count, leaf.lower, leaf.upper);
        const double ro = std::clamp(right_sum / right_count, leaf.lower, leaf.upper);
        if (monotone_[f] > 0 && lo > ro) continue;
        const double gain = leaf_objective(lo, left_sum, left_count) +
                            leaf_objective(ro, right_sum, right_count) - parent_obj;
        if (gain > cfg_.min_split_gain && gain > leaf.best.gain) {
          leaf.best = {gain, static_cast<int>(f), b, left_sum, right_sum, left_count,
                       right_count, lo, ro};
        }
      }
    }
  }

  void split(std::vector<Leaf>& leaves, std::size_t idx, Tree& tree,
             const std::vector<double>& resid) {
    const SplitCandidate s = leaves[idx].best;
    const std::size_t begin = leaves[idx].begin, end = leaves[idx].end;

    // Stable partition of the leaf's rows.
    const std::uint16_t* col = bins_.data() + static_cast<std::size_t>(s.feature) * n_rows_;
    std::size_t l = begin, r = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = order_[i];
      if (col[row] <= s.bin) order_[l++] = row;
      else scratch_[r++] = row;
    }
    std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r),
              order_.begin() + static_cast<std::ptrdiff_t>(l));

    const int node_id = leaves[idx].node;
    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    {
      auto& node = tree.nodes[node_id];
      node.feature = s.feature;
      node.threshold = cuts_[s.feature][s.bin - 1];
      node.left = left_id;
      node.right = left_id + 1;
      node.lower = leaves[idx].lower;
      node.upper = leaves[idx].upper;
      node.samples = static_cast<int>(leaves[idx].count);
    }

    Leaf left, right;
    left.begin = begin;
    left.end = l;
    left.sum = s.left_sum;
    left.count = s.left_count;
    left.node = left_id;
    right.begin = l;
    right.end = end;
    right.sum = s.right_sum;
    right.count = s.right_count;
    right.node = left_id + 1;
    left.lower = right.lower = leaves[idx].lower;
    left.upper = right.upper = leaves[idx].upper;
    if (monotone_[s.feature] > 0) {
      const double mid = (s.left_out + s.right_out) / 2.0;
      left.upper = mid;
      right.lower = mid;
    }

    // Direct histogram for the smaller child, subtraction for the larger.
    Leaf& parent = leaves[idx];
    Leaf* small = left.count <= right.count ? &left : &right;
    Leaf* large = small == &left ? &right : &left;
    build_histogram(*small, resid);
    large->hist = std::move(parent.hist);
    for (std::size_t k = 0; k < large->hist.size(); ++k) {
      large->hist[k].sum -= small->hist[k].sum;
      large->hist[k].count -= small->hist[k].count;
    }
    find_best_split(left);
    find_best_split(right);
    leaves[idx] = std::move(left);
    leaves.push_back(std::move(right));
  }

  const std::vector<std::uint16_t>& bins_;
  std::size_t n_rows_;
  const std::vector<std::vector<double>>& cuts_;
  const std::vector<int>& monotone_;
  const TrainConfig& cfg_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint32_t> scratch_;
};

double rmse(std::span<const double> y, std::span<const double> pred) {
  if (y.empty()) return 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - pred[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

}  // namespace

BoostedEnsemble fit_ensemble(const FeatureMatrix& X, std::span<const double> y,
                             const FeatureSchema& schema, const TrainConfig& cfg,
                             TrainingReport* report) {
  cfg.validate();
  if (X.rows != y.size())
    throw Error(ErrorCode::LengthMismatch, "feature rows and targets differ in length");
  if (X.cols != schema.size())
    throw Error(ErrorCode::SchemaMismatch, "feature matrix width differs from schema");
  if (X.rows < 100)
    throw Error(ErrorCode::TooFewSamples,
                "need at least 100 training rows, got " + std::to_string(X.rows));
  for (double v : y)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteTarget, "target contains non-finite value");
  for (std::size_t i = 0; i < X.rows; ++i)
    if (i < X.trainable.size() && !X.trainable[i])
      throw Error(ErrorCode::TooFewSamples, "training matrix contains not-trainable rows");

  const std::size_t n = X.rows;
  const std::size_t n_feat = X.cols;
  const auto n_valid = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n))), 1,
      n - 1);
  const std::size_t n_fit = n - n_valid;

  // Quantile bins from the fitting slice.
  std::vector<std::vector<double>> cuts(n_feat);
  std::vector<std::uint16_t> bins(n_feat * n_fit);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n_feat, 1),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (auto f = r.begin(); f != r.end(); ++f) {
                        std::vector<double> col(n_fit);
                        for (std::size_t i = 0; i < n_fit; ++i) col[i] = X.at(i, f);
                        cuts[f] = compute_cuts(col, cfg.histogram_bins - 1, cfg.exact_splits);
                        for (std::size_t i = 0; i < n_fit; ++i)
                          bins[f * n_fit + i] = bin_of(cuts[f], col[i]);
                      }
                    });

  double base = 0.0;
  for (std::size_t i = 0; i < n_fit; ++i) base += y[i];
  base /= static_cast<double>(n_fit);

  std::vector<int> monotone(schema.monotone.begin(), schema.monotone.end());
  std::vector<double> pred_fit(n_fit, base), pred_val(n_valid, base), resid(n_fit);
  const auto y_fit = y.subspan(0, n_fit);
  const auto y_val = y.subspan(n_fit);

  TrainingReport rep;
  rep.fit_rows = n_fit;
  rep.valid_rows = n_valid;
  for (const auto& c : cuts) rep.bins_per_feature.push_back(static_cast<int>(c.size()) + 1);
  rep.train_rmse.push_back(rmse(y_fit, pred_fit));
  rep.valid_rmse.push_back(rmse(y_val, pred_val));

  TreeGrower grower(bins, n_fit, cuts, monotone, cfg);
  std::vector<Tree> trees;
  std::vector<double> leaf_out;
  std::size_t best_iter = 0;
  double best_valid = rep.valid_rmse[0];

  for (int t = 0; t < cfg.max_trees; ++t) {
    for (std::size_t i = 0; i < n_fit; ++i) resid[i] = y_fit[i] - pred_fit[i];
    Tree tree = grower.grow(resid, n_fit, leaf_out);
    if (tree.nodes.empty()) break;
    for (std::size_t i = 0; i < n_fit; ++i) pred_fit[i] += cfg.learning_rate * leaf_out[i];
    for (std::size_t i = 0; i < n_valid; ++i)
      pred_val[i] += cfg.learning_rate * tree.predict(X.row(n_fit + i));
    trees.push_back(std::move(tree));

    rep.train_rmse.push_back(rmse(y_fit, pred_fit));
    rep.valid_rmse.push_back(rmse(y_val, pred_val));
    const std::size_t iter = trees.size();
    if (rep.valid_rmse[iter] < best_valid) {
      best_valid = rep.valid_rmse[iter];
      best_iter = iter;
    }
    if (iter - best_iter >= static_cast<std::size_t>(cfg.early_stopping_rounds)) break;
  }

  trees.resize(best_iter);
  rep.selected_trees = best_iter;
  if (report) *report = std::move(rep);
  return BoostedEnsemble(base, cfg.learning_rate, std::move(monotone), std::move(trees));
}

Tree fit_tree(const FeatureMatrix& X, std::span<const double> residuals, std::span<const int> monotone,
              const TrainConfig& cfg) {
  cfg.validate();
  if (X.rows != residuals.size())
    throw Error(ErrorCode::LengthMismatch, "feature rows and residuals differ in length");
  if (X.cols != monotone.size())
    throw Error(ErrorCode::FeatureCountMismatch, "monotone directions differ from matrix width");
  const std::size_t n = X.rows;
  std::vector<std::vector<double>> cuts(X.cols);
  std::vector<std::uint16_t> bins(X.cols * n);
  for (std::size_t f = 0; f < X.cols; ++f) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = X.at(i, f);
    cuts[f] = compute_cuts(col, cfg.histogram_bins - 1, cfg.exact_splits);
    for (std::size_t i = 0; i < n; ++i) bins[f * n + i] = bin_of(cuts[f], col[i]);
  }
  const std::vector<int> mono(monotone.begin(), monotone.end());
  const std::vector<double> resid(residuals.begin(), residuals.end());
  std::vector<double> leaf_out;
  TreeGrower grower(bins, n, cuts, mono, cfg);
  return grower.grow(resid, n, leaf_out);
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t probe_feature(const BoostedEnsemble& model, std::size_t feature, std::size_t probes,
                          std::mt19937_64& rng, const FeatureMatrix& reference) {
  if (probes == 0 || reference.rows == 0) return 0;
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i < reference.rows; ++i) {
    const double v = reference.at(i, feature);
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo <= hi)) lo = hi = 0.0;
  const double pad = (hi - lo) * 0.1 + 1e-6;
  lo -= pad;
  hi += pad;

  std::vector<double> row(reference.cols);
  std::size_t violations = 0;
  for (std::size_t p = 0; p < probes; ++p) {
    const auto base = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(reference.rows));
    const auto src = reference.row(std::min(base, reference.rows - 1));
    std::copy(src.begin(), src.end(), row.begin());
    double a = lo + uniform01(rng) * (hi - lo);
    double b = lo + uniform01(rng) * (hi - lo);
    if (a > b) std::swap(a, b);
    if (a == b) b = std::nextafter(b, kInf);
    row[feature] = a;
    const double low = model.predict(row);
    row[feature] = b;
    const double high = model.predict(row);
    if (high < low) ++violations;
  }
  return violations;
}

}  // namespace

std::size_t check_monotonicity(const BoostedEnsemble& model, const FeatureSchema& schema,
                               std::size_t probes, std::uint64_t seed,
                               const FeatureMatrix& reference) {
  std::vector<std::size_t> constrained;
  for (std::size_t f = 0; f < schema.monotone.size(); ++f)
    if (schema.monotone[f] > 0) constrained.push_back(f);
  if (constrained.empty() || probes == 0) return 0;
  std::mt19937_64 rng(seed);
  std::size_t violations = 0;
  for (std::size_t k = 0; k < constrained.size(); ++k) {
    const std::size_t share = probes / constrained.size() + (k < probes % constrained.size() ? 1 : 0);
    violations += probe_feature(model, constrained[k], share, rng, reference);
  }
  return violations;
}

std::size_t check_monotonicity_feature(const BoostedEnsemble& model, std::size_t feature,
                                       std::size_t probes, std::uint64_t seed,
                                       const FeatureMatrix& reference) {
  std::mt19937_64 rng(seed);
  return probe_feature(model, feature, probes, rng, reference);
}

}  // namespace coolopt

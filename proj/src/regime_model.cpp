#include "coolopt/regime_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "coolopt/error.hpp"

namespace coolopt {
namespace {

using Point = std::array<double, 2>;

double sq_dist(const Point& a, const Point& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int nearest(const std::array<Point, kRegimeCount>& centroids, const Point& p) {
  int best = 0;
  double best_d = sq_dist(centroids[0], p);
  for (int k = 1; k < kRegimeCount; ++k) {
    const double d = sq_dist(centroids[k], p);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

RegimeModel fit_regimes(std::span<const RegimePoint> points, std::uint64_t seed,
                        RegimeFitReport* report, const KMeansOptions& options) {
  std::set<std::pair<double, double>> distinct;
  for (const auto& p : points) {
    distinct.emplace(p.q_tot, p.t_sup);
    if (distinct.size() >= kRegimeCount) break;
  }
  if (distinct.size() < kRegimeCount)
    throw Error(ErrorCode::DegenerateData, "regime fit needs at least 3 distinct points");

  const std::size_t n = points.size();
  RegimeModel model;
  for (int d = 0; d < 2; ++d) {
    double sum = 0.0;
    for (const auto& p : points) sum += d == 0 ? p.q_tot : p.t_sup;
    model.mean[d] = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& p : points) {
      const double v = (d == 0 ? p.q_tot : p.t_sup) - model.mean[d];
      ss += v * v;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    // A constant dimension carries no cluster information; unit scale keeps it inert.
    model.stddev[d] = sd > 0.0 ? sd : 1.0;
  }

  std::vector<Point> z(n);
  for (std::size_t i = 0; i < n; ++i)
    z[i] = {(points[i].q_tot - model.mean[0]) / model.stddev[0],
            (points[i].t_sup - model.mean[1]) / model.stddev[1]};

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::array<Point, kRegimeCount> centroids{};
  centroids[0] = z[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n];
  std::vector<double> d2(n);
  for (int k = 1; k < kRegimeCount; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = sq_dist(z[i], centroids[0]);
      for (int j = 1; j < k; ++j) best = std::min(best, sq_dist(z[i], centroids[j]));
      d2[i] = best;
      total += best;
    }
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] == 0.0) --pick;  // the tail may round past the last positive weight
    centroids[k] = z[pick];
  }

  std::vector<int> assign(n, 0);
  RegimeFitReport local;
  RegimeFitReport& rep = report ? *report : local;
  rep = {};
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = nearest(centroids, z[i]);
      wcss += sq_dist(z[i], centroids[assign[i]]);
    }
    rep.wcss.push_back(wcss);
    ++rep.iterations;

    std::array<Point, kRegimeCount> sums{};
    std::array<std::size_t, kRegimeCount> counts{};
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]][0] += z[i][0];
      sums[assign[i]][1] += z[i][1];
      ++counts[assign[i]];
    }
    double shift = 0.0;
    for (int k = 0; k < kRegimeCount; ++k) {
      if (counts[k] == 0) continue;  // an empty cluster keeps its centroid
      const Point next{sums[k][0] / static_cast<double>(counts[k]),
                       sums[k][1] / static_cast<double>(counts[k])};
      shift = std::max(shift, std::sqrt(sq_dist(next, centroids[k])));
      centroids[k] = next;
    }
    if (shift < options.tolerance) break;
  }

  std::array<int, kRegimeCount> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (centroids[a][0] != centroids[b][0]) return centroids[a][0] < centroids[b][0];
    return centroids[a][1] < centroids[b][1];
  });
  for (int id = 0; id < kRegimeCount; ++id) {
    model.centroids[id] = centroids[order[id]];
    model.label_order[order[id]] = id;
  }

  rep.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    rep.labels[i] = assign_regime(model, points[i].q_tot, points[i].t_sup);
  return model;
}

int assign_regime(const RegimeModel& model, double q_tot, double t_sup) {
  const Point p{(q_tot - model.mean[0]) / model.stddev[0], (t_sup - model.mean[1]) / model.stddev[1]};
  return nearest(model.centroids, p);
}

RegimePoint regime_centroid(const RegimeModel& model, int regime) {
  const auto& c = model.centroids[regime];
  return {c[0] * model.stddev[0] + model.mean[0], c[1] * model.stddev[1] + model.mean[1]};
}

}  // namespace coolopt

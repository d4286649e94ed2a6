#pragma once

// Reference implementations used only by the tests. Each one is written from
// the definition of the quantity, not from the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coolopt/telemetry.hpp"

namespace oracle {

/// Least-squares non-decreasing fit by enumerating every split of the array
/// into consecutive blocks. The optimum is constant on blocks at the block
/// means, so the feasible candidate with the smallest error is the answer.
inline std::vector<double> isotonic_brute_force(const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> best;
  double best_sse = std::numeric_limits<double>::infinity();
  const std::uint32_t patterns = n ? (1u << (n - 1)) : 1u;
  for (std::uint32_t mask = 0; mask < patterns; ++mask) {
    std::vector<double> fit(n);
    std::size_t start = 0;
    double prev = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const bool block_ends = i + 1 == n || (mask >> i) & 1u;
      if (!block_ends) continue;
      double sum = 0.0;
      for (std::size_t k = start; k <= i; ++k) sum += y[k];
      const double mean = sum / static_cast<double>(i - start + 1);
      if (mean < prev - 1e-12) ok = false;
      for (std::size_t k = start; k <= i; ++k) fit[k] = mean;
      prev = mean;
      start = i + 1;
    }
    if (!ok) continue;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) sse += (fit[i] - y[i]) * (fit[i] - y[i]);
    if (sse < best_sse - 1e-15) {
      best_sse = sse;
      best = fit;
    }
  }
  return best;
}

struct SplitChoice {
  int feature = -1;
  std::vector<bool> goes_left;
  double gain = 0.0;
};

inline double sum_squared_deviation(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

/// Tries every threshold between consecutive distinct values of every
/// feature and keeps the partition with the largest drop in squared error.
/// `columns[f][row]`. Ties keep the earliest (feature, threshold).
inline SplitChoice best_split(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                              std::size_t min_leaf) {
  SplitChoice best;
  const double parent = sum_squared_deviation(y);
  for (std::size_t f = 0; f < columns.size(); ++f) {
    std::vector<double> distinct = columns[f];
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t t = 0; t + 1 < distinct.size(); ++t) {
      std::vector<double> left, right;
      std::vector<bool> mask(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        mask[i] = columns[f][i] <= distinct[t];
        (mask[i] ? left : right).push_back(y[i]);
      }
      if (left.size() < min_leaf || right.size() < min_leaf) continue;
      const double gain = parent - sum_squared_deviation(left) - sum_squared_deviation(right);
      if (gain > best.gain) {
        best = {static_cast<int>(f), mask, gain};
      }
    }
  }
  return best;
}

/// Lag and trailing mean computed by looking values up by grid slot.
struct History {
  std::vector<double> lag;   // NaN when absent
  std::vector<double> mean;  // NaN when the window holds nothing
};

inline History history_by_slot(const std::vector<double>& values, const std::vector<std::int64_t>& slots,
                               int lag, int window) {
  std::map<std::int64_t, double> by_slot;
  for (std::size_t i = 0; i < values.size(); ++i) by_slot[slots[i]] = values[i];
  History h;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto it = by_slot.find(slots[i] - lag);
    h.lag.push_back(it == by_slot.end() ? std::nan("") : it->second);
    double sum = 0.0;
    int count = 0;
    for (std::int64_t s = slots[i] - window + 1; s <= slots[i]; ++s) {
      auto w = by_slot.find(s);
      if (w != by_slot.end()) {
        sum += w->second;
        ++count;
      }
    }
    h.mean.push_back(count ? sum / count : std::nan(""));
  }
  return h;
}

struct Metrics {
  double mae, rmse, r2, smape, wape, rmsle;
};

inline Metrics metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
  const double n = static_cast<double>(y.size());
  double abs_err = 0, sq_err = 0, abs_y = 0, mean = 0, smape = 0, sq_log = 0;
  for (double v : y) mean += v / n;
  double sst = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = yhat[i] - y[i];
    abs_err += std::abs(e);
    sq_err += e * e;
    abs_y += std::abs(y[i]);
    sst += (y[i] - mean) * (y[i] - mean);
    const double denom = std::abs(y[i]) + std::abs(yhat[i]);
    smape += denom == 0.0 ? 0.0 : 2.0 * std::abs(e) / denom;
    const double dl = std::log(1.0 + yhat[i]) - std::log(1.0 + y[i]);
    sq_log += dl * dl;
  }
  return {abs_err / n, std::sqrt(sq_err / n), 1.0 - sq_err / sst, 100.0 * smape / n, abs_err / abs_y,
          std::sqrt(sq_log / n)};
}

/// Probe pairs that copy a random base row and set one feature to two random
/// values a < b inside [lo, hi]; counts pairs where f(b) < f(a).
template <class Predict>
std::size_t monotone_violations(Predict&& predict, const std::vector<std::vector<double>>& base_rows,
                                std::size_t feature, double lo, double hi, std::size_t probes,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, base_rows.size() - 1);
  std::uniform_real_distribution<double> u(lo, hi);
  std::size_t violations = 0;
  for (std::size_t k = 0; k < probes; ++k) {
    auto row = base_rows[pick(rng)];
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    row[feature] = a;
    const double low = predict(row);
    row[feature] = b;
    if (predict(row) < low) ++violations;
  }
  return violations;
}

}  // namespace oracle

namespace testutil {

inline coolopt::Timestamp at(const char* text) { return *coolopt::parse_timestamp(text); }

/// A plausible operating point: three loops with positive lifts.
inline coolopt::TelemetryRecord record(coolopt::Timestamp ts, double p_it = 18.0, double p_acc = 0.6) {
  coolopt::TelemetryRecord r;
  r.timestamp = ts;
  r.p_it = p_it;
  r.t_sup = 31.0;
  r.t_ret = {35.0, 36.0, 34.5};
  r.q = {240.0, 430.0, 290.0};
  r.p_acc = p_acc;
  return r;
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("coolopt_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil

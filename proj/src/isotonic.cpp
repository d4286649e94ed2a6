#include "coolopt/isotonic.hpp"

#include <algorithm>
#include <numeric>

#include "coolopt/error.hpp"

namespace coolopt {

IsotonicMap fit_isotonic(std::span<const double> raw, std::span<const double> target) {
  if (raw.size() != target.size() || raw.size() < 2)
    throw Error(ErrorCode::LengthMismatch, "isotonic fit needs equal-length inputs of size >= 2");

  std::vector<std::size_t> idx(raw.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return raw[a] < raw[b]; });

  struct Block {
    double x_first, x_last;
    double sum;
    double weight;
    double mean() const { return sum / weight; }
  };
  std::vector<Block> blocks;
  blocks.reserve(raw.size());
  for (std::size_t k = 0; k < idx.size();) {
    const double x = raw[idx[k]];
    Block b{x, x, 0.0, 0.0};
    for (; k < idx.size() && raw[idx[k]] == x; ++k) {
      b.sum += target[idx[k]];
      b.weight += 1.0;
    }
    blocks.push_back(b);
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block top = blocks.back();
      blocks.pop_back();
      auto& prev = blocks.back();
      prev.x_last = top.x_last;
      prev.sum += top.sum;
      prev.weight += top.weight;
    }
  }

  // Interpolating between a block's first and last raw value reproduces the
  // constant block level, so two knots per block suffice.
  IsotonicMap map;
  for (const auto& b : blocks) {
    const double y = b.mean();
    map.knots_x.push_back(b.x_first);
    map.knots_y.push_back(y);
    if (b.x_last != b.x_first) {
      map.knots_x.push_back(b.x_last);
      map.knots_y.push_back(y);
    }
  }
  return map;
}

double apply_isotonic(const IsotonicMap& map, double raw) {
  const auto& xs = map.knots_x;
  const auto& ys = map.knots_y;
  if (raw <= xs.front()) return ys.front();
  if (raw >= xs.back()) return ys.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), raw) - xs.begin());
  const std::size_t lo = hi - 1;
  if (raw == xs[lo]) return ys[lo];
  const double t = (raw - xs[lo]) / (xs[hi] - xs[lo]);
  return std::min(ys[lo] + t * (ys[hi] - ys[lo]), ys[hi]);
}

}  // namespace coolopt

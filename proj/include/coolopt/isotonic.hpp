#pragma once

#include <span>
#include <vector>

namespace coolopt {

/// Piecewise-linear non-decreasing map from raw predictions to calibrated
/// values. Inputs outside the knot range clamp to the end values.
struct IsotonicMap {
  std::vector<double> knots_x;  // strictly ascending
  std::vector<double> knots_y;  // non-decreasing

  bool operator==(const IsotonicMap&) const = default;
};

/// Least-squares isotonic fit by pool-adjacent-violators. Duplicate raw values
/// are pooled by mean first. Throws LengthMismatch on unequal or < 2 lengths.
IsotonicMap fit_isotonic(std::span<const double> raw, std::span<const double> target);

double apply_isotonic(const IsotonicMap& map, double raw);

}  // namespace coolopt

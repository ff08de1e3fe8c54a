#pragma once

#include <span>
#include <vector>

#include "ccvolt/types.hpp"

namespace ccvolt {

/// Bus of a radial feeder. Bus 0 is the reference (feeder head) and its `p` is ignored.
struct Bus {
  int id = 0;
  double p = 0.0;  ///< real-power injection, p.u. (generation minus consumption)

  friend bool operator==(const Bus&, const Bus&) = default;
};

/// Line between two buses. Resistance and reactance in p.u.
struct Line {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;

  friend bool operator==(const Line&, const Line&) = default;
};

/// R and X of the linearized DistFlow model, indexed by bus id - 1.
struct SensitivityMatrices {
  Matrix R;
  Matrix X;

  Eigen::Index size() const { return R.rows(); }
};

/// Validated radial feeder: a tree rooted at bus 0.
///
/// Lines are stored oriented parent -> child whatever the input order was.
/// Immutable after construction.
class RadialNetwork {
 public:
  /// Validates ids, impedances and the tree property, then orients every line
  /// away from bus 0. Throws Error with BadBusId, BadImpedance, DuplicateLine,
  /// CycleDetected or DisconnectedBus.
  static RadialNetwork build(std::vector<Bus> buses, std::vector<Line> lines);

  /// Number of non-reference buses (N).
  int size() const { return static_cast<int>(buses_.size()) - 1; }

  const std::vector<Bus>& buses() const { return buses_; }
  /// Oriented lines, sorted by child bus id.
  const std::vector<Line>& lines() const { return lines_; }

  /// Parent bus of `bus` (bus 0 has parent -1).
  int parent(int bus) const;
  /// The line feeding `bus` from its parent. `bus` in 1..N.
  const Line& line_to(int bus) const;
  int depth(int bus) const;

  /// Real injections of buses 1..N.
  Vector injections() const;

 private:
  RadialNetwork() = default;

  std::vector<Bus> buses_;
  std::vector<Line> lines_;  // lines_[k - 1] feeds bus k
  std::vector<int> parent_;
  std::vector<int> depth_;
};

/// Lines on the unique path from bus 0 down to `bus`, root first. Throws BadBusId.
std::vector<Line> path_to_root(const RadialNetwork& net, int bus);

/// R[i][k] (X[i][k]) is the total resistance (reactance) of the lines shared by
/// the root paths of buses i+1 and k+1.
SensitivityMatrices sensitivity_matrices(const RadialNetwork& net);

/// Voltage deviation from nominal, R*P + X*Q. Throws DimensionMismatch.
Vector voltage_profile(const SensitivityMatrices& sens, const Vector& p, const Vector& q);

}  // namespace ccvolt

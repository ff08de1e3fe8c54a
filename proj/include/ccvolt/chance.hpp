#pragma once

#include <optional>

#include "ccvolt/mvnprob.hpp"
#include "ccvolt/network.hpp"
#include "ccvolt/uncertainty.hpp"

namespace ccvolt {

/// Voltage band as deviations from nominal, p.u.
struct VoltageBounds {
  Vector v_lo;
  Vector v_hi;
};

/// One reactive-dispatch instance. Unbounded reactive limits are +-infinity.
struct DispatchProblem {
  SensitivityMatrices sens;
  Vector p;
  Vector q_lo;
  Vector q_hi;
  VoltageBounds vbounds;
  GaussianUncertainty unc;
  double alpha = 0.9;  ///< joint tolerance
  double eta = 0.9;    ///< per-bus tolerance

  int size() const { return static_cast<int>(p.size()); }

  /// Throws InvalidProblem / DimensionMismatch / DegenerateBounds.
  void validate() const;
};

/// The unit-box form of the joint event: g(Q) = F(A Q + b) under sigma'.
struct StandardizedBox {
  Matrix A;             ///< U^-1 X
  Vector b;             ///< U^-1 (R P - v_lo)
  ScaledUncertainty sigma_prime;
  Vector u;             ///< v_hi - v_lo

  Vector z(const Vector& q) const { return A * q + b; }
};

StandardizedBox standardize(const DispatchProblem& prob);

/// g(Q) = Pr{v_lo <= R P + X Q + eps <= v_hi}.
ProbEstimate joint_probability(const StandardizedBox& box, const Vector& q, const EstimatorOptions& opts = {});
/// A^T grad F(A Q + b).
Vector joint_probability_gradient(const StandardizedBox& box, const Vector& q, const EstimatorOptions& opts = {});

/// Exact marginal probability at bus `bus` (1..N), ignoring cross-bus correlation.
double per_bus_probability(const DispatchProblem& prob, int bus, const Vector& q);

struct MeanInterval {
  double lo;
  double hi;
};

/// {m : Phi((v_hi-m)/s) - Phi((v_lo-m)/s) >= eta} for bus `bus` (1..N), found
/// by bisection to 1e-10 inside [v_lo - 12 s, v_hi + 12 s]; nullopt when even
/// the centered mean misses eta.
std::optional<MeanInterval> per_bus_mean_interval(const DispatchProblem& prob, int bus, double eta);

}  // namespace ccvolt

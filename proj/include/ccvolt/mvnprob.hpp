#pragma once

#include <cstdint>

#include "ccvolt/types.hpp"
#include "ccvolt/uncertainty.hpp"

// Multivariate normal rectangle probabilities.
//
// Boxes of effective dimension <= 3 (after dropping coordinates that are
// unbounded on both sides) are integrated deterministically with adaptive
// Gauss-Kronrod quadrature over the separation-of-variables transform.
// Larger boxes use a randomized Richtmyer lattice rule with antithetic
// tent-transformed points; the reported error is 3x the standard error over
// the randomized replicates. Replicate shifts come from a fixed seed, so every
// call is bit-reproducible.
namespace ccvolt {

inline constexpr std::uint64_t kEstimatorSeed = 0x00C0FFEE;
inline constexpr double kDefaultTargetError = 1e-4;
inline constexpr double kSurfaceTargetError = 1e-3;
inline constexpr int kDeterministicMaxDim = 3;

enum class Execution { Serial, Parallel };

struct EstimatorOptions {
  double target_error = kDefaultTargetError;
  std::uint64_t seed = kEstimatorSeed;
  /// Lattice points per replicate; 0 means adaptive doubling until the
  /// target error is met. A fixed count gives common random numbers across
  /// nearby evaluations (used for finite differences).
  std::int64_t fixed_points = 0;
  Execution execution = Execution::Parallel;
};

struct ProbEstimate {
  double value = 0.0;
  double error = 0.0;
  std::int64_t evaluations = 0;
  /// Lattice points per replicate actually used (0 for deterministic paths).
  std::int64_t points = 0;
};

/// Axis-aligned box; entries may be +-infinity.
struct BoxQuery {
  Vector lo;
  Vector hi;
};

/// Pr{lo <= eps <= hi} for eps ~ N(0, noise.sigma()).
/// A box with lo[i] == hi[i] anywhere has probability exactly 0.
/// Throws InvalidBox (lo > hi, NaN), InvalidProblem (target_error outside
/// (0, 0.1]) or DimensionMismatch.
ProbEstimate box_probability(const BoxQuery& box, const GaussianUncertainty& noise,
                             const EstimatorOptions& opts = {});
inline ProbEstimate box_probability(const BoxQuery& box, const GaussianUncertainty& noise, double target_error) {
  EstimatorOptions o;
  o.target_error = target_error;
  return box_probability(box, noise, o);
}

/// Same as box_probability but on an unvalidated covariance (used for
/// conditional covariances built internally). The covariance must be SPD.
ProbEstimate box_probability_raw(const Vector& lo, const Vector& hi, const Matrix& sigma,
                                 const EstimatorOptions& opts);

/// Partial derivatives of the box probability with respect to each bound.
struct BoxGradient {
  Vector d_lo;
  Vector d_hi;
};

/// Lattice size of the face integrals relative to a frozen value lattice.
inline constexpr std::int64_t kGradientPointsDivisor = 16;

/// dP/dhi_i = phi_i(hi_i) * Pr{box without i | eps_i = hi_i}, and
/// dP/dlo_i = -phi_i(lo_i) * Pr{box without i | eps_i = lo_i}. Infinite
/// bounds have zero derivative. With opts.fixed_points set, each face uses
/// fixed_points / kGradientPointsDivisor points (at least the initial 128).
BoxGradient box_probability_gradient(const Vector& lo, const Vector& hi, const Matrix& sigma,
                                     const EstimatorOptions& opts = {});

/// F(z) = Pr{z - 1 <= eps' <= z}.
ProbEstimate unit_box_F(const Vector& z, const GaussianUncertainty& sigma_prime, const EstimatorOptions& opts = {});
inline ProbEstimate unit_box_F(const Vector& z, const ScaledUncertainty& s, double target_error = kDefaultTargetError) {
  EstimatorOptions o;
  o.target_error = target_error;
  return unit_box_F(z, s.noise, o);
}

enum class GradientMethod { Analytic, FiniteDifference };
inline constexpr double kFiniteDifferenceStep = 1e-4;

/// Gradient of F. The analytic path conditions the Gaussian on each face of
/// the box; the finite-difference path is central differences with step
/// 1e-4 and common random numbers, kept for cross-validation.
Vector unit_box_F_gradient(const Vector& z, const GaussianUncertainty& sigma_prime, const EstimatorOptions& opts = {},
                           GradientMethod method = GradientMethod::Analytic);
inline Vector unit_box_F_gradient(const Vector& z, const ScaledUncertainty& s,
                                  double target_error = kDefaultTargetError,
                                  GradientMethod method = GradientMethod::Analytic) {
  EstimatorOptions o;
  o.target_error = target_error;
  return unit_box_F_gradient(z, s.noise, o, method);
}

/// Plain Monte Carlo: the fraction of `n` draws of sample(noise, n, seed) that
/// land in the box; error = sqrt(p(1-p)/n). Requires n >= 1000.
ProbEstimate mc_box_probability(const BoxQuery& box, const GaussianUncertainty& noise, std::int64_t n,
                                std::uint64_t seed, Execution execution = Execution::Parallel);

}  // namespace ccvolt

#pragma once

#include <cstdint>

#include "ccvolt/types.hpp"

namespace ccvolt {

/// Density seam for zero-mean, centrally symmetric, log-concave noise.
///
/// Only the Gaussian family is implemented; the box-probability engine is
/// Gaussian-specific. Symmetry is what makes the unit-box reflection valid.
class SymmetricNoiseDensity {
 public:
  virtual ~SymmetricNoiseDensity() = default;
  virtual int dimension() const = 0;
  virtual double log_density(const Vector& x) const = 0;
};

/// Zero-mean Gaussian voltage noise with a strictly positive-definite covariance.
class GaussianUncertainty final : public SymmetricNoiseDensity {
 public:
  /// Checks shape, symmetry (1e-12, relative to max|sigma| when that exceeds 1)
  /// and positive definiteness, and caches the Cholesky factor.
  /// Throws DimensionMismatch, NotSymmetric or NotPositiveDefinite.
  static GaussianUncertainty validate(const Matrix& sigma);

  int dimension() const override { return static_cast<int>(sigma_.rows()); }
  double log_density(const Vector& x) const override;

  const Matrix& sigma() const { return sigma_; }
  /// Lower-triangular L with sigma = L * L^T.
  const Matrix& cholesky() const { return chol_; }
  Vector stddev() const { return sigma_.diagonal().cwiseSqrt(); }

 private:
  GaussianUncertainty(Matrix sigma, Matrix chol, double log_det);

  Matrix sigma_;
  Matrix chol_;
  double log_det_ = 0.0;
};

/// Covariance of U^-1 * eps with U = diag(u).
struct ScaledUncertainty {
  Vector u;
  GaussianUncertainty noise;

  const Matrix& sigma_prime() const { return noise.sigma(); }
};

/// sigma'[i][j] = sigma[i][j] / (u[i] u[j]). Throws NonPositiveScale or DimensionMismatch.
ScaledUncertainty scale(const GaussianUncertainty& unc, const Vector& u);

/// Builds the covariance diag(s) * C * diag(s) from standard deviations and a
/// correlation matrix, then validates it.
GaussianUncertainty from_correlation(const Vector& stddev, const Matrix& correlation);

/// n i.i.d. draws L*w (one per row), w standard normal from the counter-based
/// generator in normal.hpp: draw j, coordinate k uses counter j*N + k.
/// Bit-reproducible for a given (seed, n).
Matrix sample(const GaussianUncertainty& unc, std::int64_t n, std::uint64_t seed);
inline Matrix sample(const ScaledUncertainty& unc, std::int64_t n, std::uint64_t seed) {
  return sample(unc.noise, n, seed);
}

}  // namespace ccvolt

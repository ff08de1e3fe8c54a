#include "ccvolt/uncertainty.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ccvolt/error.hpp"
#include "ccvolt/normal.hpp"

namespace ccvolt {

GaussianUncertainty::GaussianUncertainty(Matrix sigma, Matrix chol, double log_det)
    : sigma_(std::move(sigma)), chol_(std::move(chol)), log_det_(log_det) {}

GaussianUncertainty GaussianUncertainty::validate(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "covariance must be a non-empty square matrix, got " +
                                                  std::to_string(sigma.rows()) + "x" + std::to_string(sigma.cols()));
  }
  if (!sigma.allFinite()) throw Error(ErrorCode::NotPositiveDefinite, "covariance has non-finite entries");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw Error(ErrorCode::NotSymmetric, "max |sigma - sigma^T| = " + std::to_string(asym));
  }
  Matrix sym = 0.5 * (sigma + sigma.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  }
  Matrix chol = llt.matrixL();
  if ((chol.diagonal().array() <= 0.0).any()) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factor has a zero pivot");
  }
  const double log_det = 2.0 * chol.diagonal().array().log().sum();
  return GaussianUncertainty(std::move(sym), std::move(chol), log_det);
}

double GaussianUncertainty::log_density(const Vector& x) const {
  if (x.size() != sigma_.rows()) throw Error(ErrorCode::DimensionMismatch, "log_density argument");
  const Vector w = chol_.triangularView<Eigen::Lower>().solve(x);
  const double n = static_cast<double>(x.size());
  return -0.5 * (w.squaredNorm() + log_det_ + n * std::log(2.0 * std::numbers::pi));
}

ScaledUncertainty scale(const GaussianUncertainty& unc, const Vector& u) {
  if (u.size() != unc.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "scale vector has length " + std::to_string(u.size()));
  }
  if (!u.allFinite() || (u.array() <= 0.0).any()) {
    throw Error(ErrorCode::NonPositiveScale, "scale vector must be strictly positive");
  }
  const Vector inv = u.cwiseInverse();
  Matrix scaled = inv.asDiagonal() * unc.sigma() * inv.asDiagonal();
  return ScaledUncertainty{u, GaussianUncertainty::validate(scaled)};
}

GaussianUncertainty from_correlation(const Vector& stddev, const Matrix& correlation) {
  if (correlation.rows() != stddev.size() || correlation.cols() != stddev.size()) {
    throw Error(ErrorCode::DimensionMismatch, "correlation matrix does not match stddev length");
  }
  if ((stddev.array() <= 0.0).any() || !stddev.allFinite()) {
    throw Error(ErrorCode::NotPositiveDefinite, "standard deviations must be positive");
  }
  Matrix sigma = stddev.asDiagonal() * correlation * stddev.asDiagonal();
  return GaussianUncertainty::validate(sigma);
}

Matrix sample(const GaussianUncertainty& unc, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidProblem, "sample count must be >= 1");
  const Eigen::Index dim = unc.dimension();
  const Matrix& chol = unc.cholesky();
  Matrix out(n, dim);
  Vector w(dim);
  for (std::int64_t j = 0; j < n; ++j) {
    const auto base = static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      w(k) = normal::quantile(normal::counter_uniform(seed, base + static_cast<std::uint64_t>(k)));
    }
    out.row(j).noalias() = (chol.triangularView<Eigen::Lower>() * w).transpose();
  }
  return out;
}

}  // namespace ccvolt

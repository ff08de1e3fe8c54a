#pragma once

// Separation-of-variables form of a standardized rectangle probability.
// Internal to the probability engine and its kernels.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ccvolt/normal.hpp"
#include "ccvolt/types.hpp"

namespace ccvolt::kernels {

/// Pr{a <= L w <= b} for w standard normal, with L lower triangular after
/// Genz-Bretz variable prioritization.
struct SovProblem {
  int n = 0;
  Matrix chol;
  Vector a;
  Vector b;
};

/// One coordinate of the transform: the conditional interval mass and the
/// point y that the uniform `w` maps to inside it. Reflects into the lower
/// tail when the interval sits above zero so both tails keep precision.
inline double sov_step(double lo, double hi, double w, double* y) {
  if (lo > 0.0) {
    const double dc = normal::cdf(-lo);
    const double ec = normal::cdf(-hi);
    const double mass = dc - ec;
    if (y) *y = -normal::quantile(std::clamp(ec + w * mass, DBL_MIN, 1.0 - DBL_EPSILON / 2));
    return mass;
  }
  const double d = normal::cdf(lo);
  const double e = normal::cdf(hi);
  const double mass = e - d;
  if (y) *y = normal::quantile(std::clamp(d + w * mass, DBL_MIN, 1.0 - DBL_EPSILON / 2));
  return mass;
}

/// Integrand on [0,1]^(n-1). `y` is scratch of length n.
inline double sov_integrand(const SovProblem& p, const double* w, double* y) {
  double f = 1.0;
  for (int i = 0; i < p.n; ++i) {
    double s = 0.0;
    for (int k = 0; k < i; ++k) s += p.chol(i, k) * y[k];
    const double lii = p.chol(i, i);
    const double lo = (p.a(i) - s) / lii;
    const double hi = (p.b(i) - s) / lii;
    const bool last = i + 1 == p.n;
    const double mass = sov_step(lo, hi, last ? 0.0 : w[i], last ? nullptr : &y[i]);
    f *= mass;
    if (!(f > 0.0)) return 0.0;
  }
  return f;
}

/// Fractional parts of sqrt(prime) used as Richtmyer lattice generators.
std::span<const double> richtmyer_generators(int dims);

/// Adds, for each replicate r, the antithetic lattice average over points
/// k in [k_begin, k_end) to sums[r]. shifts holds replicates x (n-1) values.
/// Both variants accumulate each replicate in the same order, so they agree
/// bit for bit.
void qmc_sums_serial(const SovProblem& p, std::span<const double> shifts, int replicates, std::int64_t k_begin,
                     std::int64_t k_end, std::span<double> sums);
void qmc_sums_omp(const SovProblem& p, std::span<const double> shifts, int replicates, std::int64_t k_begin,
                  std::int64_t k_end, std::span<double> sums);

/// Counts draws L*w (w from counter_uniform(seed, j*N + k)) inside [lo, hi]
/// for j in [0, n).
std::int64_t mc_count_serial(const Matrix& chol, const Vector& lo, const Vector& hi, std::int64_t n,
                             std::uint64_t seed);
std::int64_t mc_count_omp(const Matrix& chol, const Vector& lo, const Vector& hi, std::int64_t n,
                          std::uint64_t seed);

/// Shared body of the lattice kernels for a single replicate.
inline double qmc_replicate_chunk(const SovProblem& p, std::span<const double> gen, const double* shift,
                                  std::int64_t k_begin, std::int64_t k_end, std::vector<double>& w,
                                  std::vector<double>& wr, std::vector<double>& y) {
  const int m = p.n - 1;
  double acc = 0.0;
  for (std::int64_t k = k_begin; k < k_end; ++k) {
    for (int j = 0; j < m; ++j) {
      double x = static_cast<double>(k) * gen[static_cast<std::size_t>(j)] + shift[j];
      x -= std::floor(x);
      w[static_cast<std::size_t>(j)] = std::fabs(2.0 * x - 1.0);
      wr[static_cast<std::size_t>(j)] = 1.0 - w[static_cast<std::size_t>(j)];
    }
    acc += 0.5 * (sov_integrand(p, w.data(), y.data()) + sov_integrand(p, wr.data(), y.data()));
  }
  return acc;
}

/// Membership test for one counter-based draw.
inline bool mc_draw_inside(const Matrix& chol, const Vector& lo, const Vector& hi, std::uint64_t seed,
                           std::uint64_t base, std::vector<double>& w) {
  const Eigen::Index n = chol.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    w[static_cast<std::size_t>(k)] =
        normal::quantile(normal::counter_uniform(seed, base + static_cast<std::uint64_t>(k)));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double e = 0.0;
    for (Eigen::Index k = 0; k <= i; ++k) e += chol(i, k) * w[static_cast<std::size_t>(k)];
    if (e < lo(i) || e > hi(i)) return false;
  }
  return true;
}

}  // namespace ccvolt::kernels

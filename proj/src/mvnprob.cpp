#include "ccvolt/mvnprob.hpp"

#include <omp.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ccvolt/error.hpp"
#include "ccvolt/normal.hpp"
#include "kernels/sov.hpp"

namespace ccvolt {

namespace {

using kernels::SovProblem;

constexpr int kReplicates = 12;
constexpr std::int64_t kInitialPoints = 128;
constexpr std::int64_t kMaxPoints = std::int64_t{1} << 20;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Prepared {
  bool resolved = false;
  double value = 0.0;
  SovProblem sov;
};

void check_shapes(const Vector& lo, const Vector& hi, const Matrix& sigma) {
  if (lo.size() != hi.size() || sigma.rows() != lo.size() || sigma.cols() != lo.size()) {
    throw Error(ErrorCode::DimensionMismatch, "box of dimension " + std::to_string(lo.size()) + "/" +
                                                  std::to_string(hi.size()) + " against covariance " +
                                                  std::to_string(sigma.rows()) + "x" + std::to_string(sigma.cols()));
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (std::isnan(lo(i)) || std::isnan(hi(i)) || lo(i) > hi(i)) {
      throw Error(ErrorCode::InvalidBox, "need lo <= hi in coordinate " + std::to_string(i));
    }
  }
}

void check_options(const EstimatorOptions& opts) {
  if (!(opts.target_error > 0.0) || opts.target_error > 0.1) {
    throw Error(ErrorCode::InvalidProblem, "target_error must lie in (0, 0.1]");
  }
  if (opts.fixed_points < 0) throw Error(ErrorCode::InvalidProblem, "fixed_points must be >= 0");
}

// Drops doubly-unbounded coordinates, standardizes, and factors with
// Genz-Bretz prioritization: at each step the remaining variable with the
// smallest expected conditional interval mass goes next.
Prepared prepare(const Vector& lo, const Vector& hi, const Matrix& sigma) {
  check_shapes(lo, hi, sigma);
  Prepared out;
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (lo(i) == hi(i)) {
      out.resolved = true;
      out.value = 0.0;
      return out;
    }
    if (!(lo(i) == -kInf && hi(i) == kInf)) active.push_back(i);
  }
  if (active.empty()) {
    out.resolved = true;
    out.value = 1.0;
    return out;
  }

  const int n = static_cast<int>(active.size());
  Matrix c(n, n);
  Vector a(n), b(n);
  for (int i = 0; i < n; ++i) {
    const double si = std::sqrt(sigma(active[static_cast<std::size_t>(i)], active[static_cast<std::size_t>(i)]));
    if (!(si > 0.0)) throw Error(ErrorCode::NumericalFailure, "non-positive variance in box query");
    a(i) = lo(active[static_cast<std::size_t>(i)]) / si;
    b(i) = hi(active[static_cast<std::size_t>(i)]) / si;
    for (int j = 0; j < n; ++j) {
      const double sj = std::sqrt(sigma(active[static_cast<std::size_t>(j)], active[static_cast<std::size_t>(j)]));
      c(i, j) = sigma(active[static_cast<std::size_t>(i)], active[static_cast<std::size_t>(j)]) / (si * sj);
    }
  }

  Matrix l = Matrix::Zero(n, n);
  Vector y = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    int best = i;
    double best_mass = kInf;
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      double var = c(j, j);
      for (int k = 0; k < i; ++k) {
        s += l(j, k) * y(k);
        var -= l(j, k) * l(j, k);
      }
      if (!(var > 1e-14)) throw Error(ErrorCode::NumericalFailure, "covariance is numerically singular");
      const double sd = std::sqrt(var);
      const double mass = normal::interval((a(j) - s) / sd, (b(j) - s) / sd);
      if (mass < best_mass) {
        best_mass = mass;
        best = j;
      }
    }
    if (best != i) {
      c.row(i).swap(c.row(best));
      c.col(i).swap(c.col(best));
      l.row(i).swap(l.row(best));
      std::swap(a(i), a(best));
      std::swap(b(i), b(best));
    }
    double var = c(i, i);
    for (int k = 0; k < i; ++k) var -= l(i, k) * l(i, k);
    if (!(var > 1e-14)) throw Error(ErrorCode::NumericalFailure, "covariance is numerically singular");
    l(i, i) = std::sqrt(var);
    for (int j = i + 1; j < n; ++j) {
      double v = c(j, i);
      for (int k = 0; k < i; ++k) v -= l(j, k) * l(i, k);
      l(j, i) = v / l(i, i);
    }
    double s = 0.0;
    for (int k = 0; k < i; ++k) s += l(i, k) * y(k);
    const double lo_i = (a(i) - s) / l(i, i);
    const double hi_i = (b(i) - s) / l(i, i);
    const double mass = normal::interval(lo_i, hi_i);
    if (mass > 1e-300) {
      y(i) = (normal::pdf(lo_i) - normal::pdf(hi_i)) / mass;
    } else if (std::isinf(lo_i)) {
      y(i) = hi_i;
    } else if (std::isinf(hi_i)) {
      y(i) = lo_i;
    } else {
      y(i) = 0.5 * (lo_i + hi_i);
    }
  }
  out.sov = SovProblem{n, std::move(l), std::move(a), std::move(b)};
  return out;
}

ProbEstimate integrate_deterministic(const SovProblem& p, double target_error) {
  using boost::math::quadrature::gauss_kronrod;
  ProbEstimate est;
  std::vector<double> y(static_cast<std::size_t>(p.n));
  std::vector<double> w(2, 0.5);
  // Relative tolerances keep log F meaningful for tiny probabilities; the
  // absolute target is always met with a wide margin.
  const double rel_tol = std::min(1e-10, target_error * 1e-3);

  if (p.n == 1) {
    est.value = kernels::sov_integrand(p, w.data(), y.data());
    est.error = 4 * std::numeric_limits<double>::epsilon() * est.value;
    est.evaluations = 1;
    return est;
  }
  if (p.n == 2) {
    std::int64_t calls = 0;
    auto f = [&](double w1) {
      ++calls;
      w[0] = w1;
      return kernels::sov_integrand(p, w.data(), y.data());
    };
    double err = 0.0;
    est.value = gauss_kronrod<double, 15>::integrate(f, 0.0, 1.0, 15, rel_tol, &err);
    est.error = err;
    est.evaluations = calls;
    return est;
  }

  std::int64_t calls = 0;
  double inner_err_max = 0.0;
  auto outer = [&](double w1) {
    auto inner = [&](double w2) {
      ++calls;
      w[0] = w1;
      w[1] = w2;
      return kernels::sov_integrand(p, w.data(), y.data());
    };
    double err = 0.0;
    const double v = gauss_kronrod<double, 15>::integrate(inner, 0.0, 1.0, 12, rel_tol * 0.1, &err);
    inner_err_max = std::max(inner_err_max, err);
    return v;
  };
  double err = 0.0;
  est.value = gauss_kronrod<double, 15>::integrate(outer, 0.0, 1.0, 12, rel_tol, &err);
  est.error = err + inner_err_max;
  est.evaluations = calls;
  return est;
}

ProbEstimate integrate_lattice(const SovProblem& p, const EstimatorOptions& opts) {
  const int m = p.n - 1;
  std::vector<double> shifts(static_cast<std::size_t>(kReplicates * m));
  for (std::size_t i = 0; i < shifts.size(); ++i) shifts[i] = normal::counter_uniform(opts.seed, i);

  std::vector<double> sums(kReplicates, 0.0);
  std::int64_t done = 0;
  std::int64_t points = opts.fixed_points > 0 ? opts.fixed_points : kInitialPoints;
  ProbEstimate est;
  for (;;) {
    if (opts.execution == Execution::Parallel) {
      kernels::qmc_sums_omp(p, shifts, kReplicates, done + 1, points + 1, sums);
    } else {
      kernels::qmc_sums_serial(p, shifts, kReplicates, done + 1, points + 1, sums);
    }
    done = points;

    double mean = 0.0;
    for (double s : sums) mean += s / static_cast<double>(points);
    mean /= kReplicates;
    double var = 0.0;
    for (double s : sums) {
      const double d = s / static_cast<double>(points) - mean;
      var += d * d;
    }
    var /= (kReplicates - 1);
    est.value = mean;
    est.error = 3.0 * std::sqrt(var / kReplicates);
    est.points = points;
    est.evaluations = 2 * kReplicates * points;
    if (opts.fixed_points > 0 || est.error <= opts.target_error || points >= kMaxPoints) break;
    points *= 2;
  }
  return est;
}

ProbEstimate finish(ProbEstimate est) {
  if (!std::isfinite(est.value)) throw Error(ErrorCode::NumericalFailure, "probability estimate is not finite");
  est.value = std::clamp(est.value, 0.0, 1.0);
  est.error = std::max(est.error, 0.0);
  return est;
}

}  // namespace

ProbEstimate box_probability_raw(const Vector& lo, const Vector& hi, const Matrix& sigma,
                                 const EstimatorOptions& opts) {
  check_options(opts);
  const Prepared prep = prepare(lo, hi, sigma);
  if (prep.resolved) return ProbEstimate{prep.value, 0.0, 0, 0};
  if (prep.sov.n <= kDeterministicMaxDim) return finish(integrate_deterministic(prep.sov, opts.target_error));
  return finish(integrate_lattice(prep.sov, opts));
}

ProbEstimate box_probability(const BoxQuery& box, const GaussianUncertainty& noise, const EstimatorOptions& opts) {
  return box_probability_raw(box.lo, box.hi, noise.sigma(), opts);
}

BoxGradient box_probability_gradient(const Vector& lo, const Vector& hi, const Matrix& sigma,
                                     const EstimatorOptions& opts) {
  check_shapes(lo, hi, sigma);
  check_options(opts);
  const Eigen::Index n = lo.size();
  BoxGradient grad{Vector::Zero(n), Vector::Zero(n)};

  struct Face {
    Eigen::Index coord;
    bool upper;
  };
  std::vector<Face> faces;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isfinite(hi(i))) faces.push_back({i, true});
    if (std::isfinite(lo(i))) faces.push_back({i, false});
  }

  EstimatorOptions inner = opts;
  inner.execution = Execution::Serial;
  if (inner.fixed_points > 0) {
    inner.fixed_points = std::max(kInitialPoints, inner.fixed_points / kGradientPointsDivisor);
  }
  std::vector<double> values(faces.size(), 0.0);

  auto eval_face = [&](std::size_t f) {
    const Eigen::Index i = faces[f].coord;
    const double t = faces[f].upper ? hi(i) : lo(i);
    const double sd = std::sqrt(sigma(i, i));
    const double density = normal::pdf(t / sd) / sd;
    if (density == 0.0) return 0.0;
    if (n == 1) return density;

    // eps_{-i} | eps_i = t  ~  N(beta t, S_{-i,-i} - S_{-i,i} S_{i,-i} / S_ii)
    Vector lo_c(n - 1), hi_c(n - 1);
    Matrix cond(n - 1, n - 1);
    for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
      if (r == i) continue;
      const double mean = sigma(r, i) / sigma(i, i) * t;
      lo_c(rr) = lo(r) - mean;
      hi_c(rr) = hi(r) - mean;
      for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
        if (c == i) continue;
        cond(rr, cc) = sigma(r, c) - sigma(r, i) * sigma(i, c) / sigma(i, i);
        ++cc;
      }
      ++rr;
    }
    return density * box_probability_raw(lo_c, hi_c, cond, inner).value;
  };

  const auto count = static_cast<std::int64_t>(faces.size());
  if (opts.execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t f = 0; f < count; ++f) values[static_cast<std::size_t>(f)] = eval_face(static_cast<std::size_t>(f));
  } else {
    for (std::int64_t f = 0; f < count; ++f) values[static_cast<std::size_t>(f)] = eval_face(static_cast<std::size_t>(f));
  }

  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (faces[f].upper) {
      grad.d_hi(faces[f].coord) = values[f];
    } else {
      grad.d_lo(faces[f].coord) = -values[f];
    }
  }
  return grad;
}

ProbEstimate unit_box_F(const Vector& z, const GaussianUncertainty& sigma_prime, const EstimatorOptions& opts) {
  const Vector lo = z.array() - 1.0;
  return box_probability_raw(lo, z, sigma_prime.sigma(), opts);
}

Vector unit_box_F_gradient(const Vector& z, const GaussianUncertainty& sigma_prime, const EstimatorOptions& opts,
                           GradientMethod method) {
  if (z.size() != sigma_prime.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "z has length " + std::to_string(z.size()));
  }
  if (method == GradientMethod::Analytic) {
    const Vector lo = z.array() - 1.0;
    const BoxGradient g = box_probability_gradient(lo, z, sigma_prime.sigma(), opts);
    return g.d_lo + g.d_hi;
  }

  EstimatorOptions fd = opts;
  if (fd.fixed_points == 0) fd.fixed_points = unit_box_F(z, sigma_prime, opts).points;
  const double h = kFiniteDifferenceStep;
  Vector grad(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Vector zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    grad(i) = (unit_box_F(zp, sigma_prime, fd).value - unit_box_F(zm, sigma_prime, fd).value) / (2.0 * h);
  }
  return grad;
}

ProbEstimate mc_box_probability(const BoxQuery& box, const GaussianUncertainty& noise, std::int64_t n,
                                std::uint64_t seed, Execution execution) {
  check_shapes(box.lo, box.hi, noise.sigma());
  if (n < 1000) throw Error(ErrorCode::InvalidProblem, "Monte Carlo oracle needs n >= 1000");
  const std::int64_t inside = execution == Execution::Parallel
                                  ? kernels::mc_count_omp(noise.cholesky(), box.lo, box.hi, n, seed)
                                  : kernels::mc_count_serial(noise.cholesky(), box.lo, box.hi, n, seed);
  const double p = static_cast<double>(inside) / static_cast<double>(n);
  return ProbEstimate{p, std::sqrt(p * (1.0 - p) / static_cast<double>(n)), n, 0};
}

}  // namespace ccvolt

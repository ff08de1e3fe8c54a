#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ccvolt/chance.hpp"
#include "ccvolt/network.hpp"
#include "ccvolt/uncertainty.hpp"

namespace ccvolt::testing {

// Random radial tree on buses 0..n: every bus k >= 1 hangs off a uniformly
// chosen earlier bus.
inline RadialNetwork random_tree(int n, std::mt19937_64& rng, double p_scale = 0.2) {
  std::uniform_real_distribution<double> imp(0.05, 0.25);
  std::uniform_real_distribution<double> load(-1.0, -0.1);
  std::vector<Bus> buses{{0, 0.0}};
  std::vector<Line> lines;
  for (int k = 1; k <= n; ++k) {
    std::uniform_int_distribution<int> parent(0, k - 1);
    buses.push_back({k, p_scale * load(rng)});
    lines.push_back({parent(rng), k, imp(rng), imp(rng)});
  }
  return RadialNetwork::build(std::move(buses), std::move(lines));
}

// Random correlation matrix with off-diagonals of either sign.
inline Matrix random_correlation(int n, std::mt19937_64& rng, double spread = 1.0) {
  std::normal_distribution<double> w(0.0, 1.0);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = spread * w(rng);
  Matrix s = a * a.transpose() + 0.5 * n * Matrix::Identity(n, n);
  const Vector d = s.diagonal().cwiseSqrt().cwiseInverse();
  Matrix c = d.asDiagonal() * s * d.asDiagonal();
  c = 0.5 * (c + c.transpose());
  c.diagonal().setOnes();
  return c;
}

inline Matrix random_covariance(int n, std::mt19937_64& rng, double sd_lo, double sd_hi) {
  std::uniform_real_distribution<double> sd(sd_lo, sd_hi);
  Vector s(n);
  for (int i = 0; i < n; ++i) s(i) = sd(rng);
  Matrix sigma = s.asDiagonal() * random_correlation(n, rng) * s.asDiagonal();
  return 0.5 * (sigma + sigma.transpose());
}

// A dispatch instance whose base voltages sag towards the lower limit, so
// that reactive support is needed. Band +-0.1, noise s.d. 0.01..0.03 p.u.
inline DispatchProblem random_problem(int n, std::mt19937_64& rng, double q_limit = 0.5) {
  const RadialNetwork net = random_tree(n, rng);
  DispatchProblem prob{sensitivity_matrices(net),
                       net.injections(),
                       Vector::Constant(n, -q_limit),
                       Vector::Constant(n, q_limit),
                       {Vector::Constant(n, -0.1), Vector::Constant(n, 0.1)},
                       GaussianUncertainty::validate(random_covariance(n, rng, 0.01, 0.03)),
                       0.9,
                       0.9};
  const Vector v = prob.sens.R * prob.p;
  std::uniform_real_distribution<double> sag(0.05, 0.09);
  prob.p *= sag(rng) / v.cwiseAbs().maxCoeff();
  return prob;
}

struct McEstimate {
  double value;
  double stderr_;
};

// Direct Monte-Carlo estimate of Pr{v_lo <= R P + X Q + eps <= v_hi} in the
// original voltage coordinates, with its own generator.
inline McEstimate raw_event_mc(const DispatchProblem& prob, const Vector& q, std::int64_t n, std::uint64_t seed) {
  const Vector mean = prob.sens.R * prob.p + prob.sens.X * q;
  const Eigen::LLT<Matrix> llt(prob.unc.sigma());
  const Matrix l = llt.matrixL();
  const int dim = prob.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w(0.0, 1.0);
  Vector draw(dim);
  Vector v(dim);
  std::int64_t hits = 0;
  for (std::int64_t s = 0; s < n; ++s) {
    for (int i = 0; i < dim; ++i) draw(i) = w(rng);
    v.noalias() = l.triangularView<Eigen::Lower>() * draw;
    bool inside = true;
    for (int i = 0; i < dim && inside; ++i) {
      const double vi = mean(i) + v(i);
      inside = vi >= prob.vbounds.v_lo(i) && vi <= prob.vbounds.v_hi(i);
    }
    hits += inside ? 1 : 0;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(n)) / static_cast<double>(n))};
}

// Phi via erf, independent of the library's erfc-based cdf.
inline double phi_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n)) {
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[static_cast<std::size_t>(i)] = x;
      weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

// Pr{lo <= eps <= hi} for a bivariate Gaussian by composite Gauss-Legendre
// integration of the density over the box (truncated at 9 s.d.).
inline double bivariate_box(const Matrix& sigma, double lo1, double hi1, double lo2, double hi2, int panels = 24,
                            int order = 20) {
  const double s1 = std::sqrt(sigma(0, 0)), s2 = std::sqrt(sigma(1, 1));
  lo1 = std::max(lo1, -9.0 * s1);
  hi1 = std::min(hi1, 9.0 * s1);
  lo2 = std::max(lo2, -9.0 * s2);
  hi2 = std::min(hi2, 9.0 * s2);
  if (!(lo1 < hi1) || !(lo2 < hi2)) return 0.0;
  const Matrix inv = sigma.inverse();
  const double norm = 1.0 / (2.0 * M_PI * std::sqrt(sigma.determinant()));
  const GaussLegendre gl(order);
  double total = 0.0;
  const double h1 = (hi1 - lo1) / panels, h2 = (hi2 - lo2) / panels;
  for (int a = 0; a < panels; ++a) {
    for (int b = 0; b < panels; ++b) {
      for (int i = 0; i < order; ++i) {
        const double x = lo1 + h1 * (a + 0.5 * (gl.nodes[static_cast<std::size_t>(i)] + 1.0));
        for (int j = 0; j < order; ++j) {
          const double y = lo2 + h2 * (b + 0.5 * (gl.nodes[static_cast<std::size_t>(j)] + 1.0));
          const double q = inv(0, 0) * x * x + 2.0 * inv(0, 1) * x * y + inv(1, 1) * y * y;
          total += gl.weights[static_cast<std::size_t>(i)] * gl.weights[static_cast<std::size_t>(j)] * norm *
                   std::exp(-0.5 * q) * 0.25 * h1 * h2;
        }
      }
    }
  }
  return total;
}

}  // namespace ccvolt::testing

#include "ccvolt/chance.hpp"

#include <cmath>
#include <string>

#include "ccvolt/error.hpp"
#include "ccvolt/normal.hpp"

namespace ccvolt {

namespace {

constexpr double kBisectionWidth = 1e-10;
constexpr double kWindowSigmas = 12.0;

void check_bus(const DispatchProblem& prob, int bus) {
  if (bus < 1 || bus > prob.size()) {
    throw Error(ErrorCode::BadBusId, "bus " + std::to_string(bus) + " outside 1.." + std::to_string(prob.size()));
  }
}

double two_sided(double v_lo, double v_hi, double mean, double sd) {
  return normal::interval((v_lo - mean) / sd, (v_hi - mean) / sd);
}

}  // namespace

void DispatchProblem::validate() const {
  const Eigen::Index n = p.size();
  if (n == 0) throw Error(ErrorCode::InvalidProblem, "empty dispatch problem");
  if (sens.R.rows() != n || sens.R.cols() != n || sens.X.rows() != n || sens.X.cols() != n ||
      q_lo.size() != n || q_hi.size() != n || vbounds.v_lo.size() != n || vbounds.v_hi.size() != n ||
      unc.dimension() != n) {
    throw Error(ErrorCode::DimensionMismatch, "dispatch problem fields disagree on N = " + std::to_string(n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(q_lo(i)) || std::isnan(q_hi(i)) || q_lo(i) > q_hi(i)) {
      throw Error(ErrorCode::InvalidProblem, "q_lo <= q_hi violated at bus " + std::to_string(i + 1));
    }
    if (!(vbounds.v_lo(i) < vbounds.v_hi(i)) || !std::isfinite(vbounds.v_lo(i)) ||
        !std::isfinite(vbounds.v_hi(i))) {
      throw Error(ErrorCode::DegenerateBounds, "v_lo < v_hi violated at bus " + std::to_string(i + 1));
    }
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidProblem, "alpha must lie in (0,1)");
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorCode::InvalidProblem, "eta must lie in (0,1)");
}

StandardizedBox standardize(const DispatchProblem& prob) {
  const Vector u = prob.vbounds.v_hi - prob.vbounds.v_lo;
  if ((u.array() <= 0.0).any()) throw Error(ErrorCode::DegenerateBounds, "v_hi - v_lo must be positive");
  prob.validate();
  const Vector inv = u.cwiseInverse();
  StandardizedBox box{inv.asDiagonal() * prob.sens.X,
                      inv.asDiagonal() * (prob.sens.R * prob.p - prob.vbounds.v_lo), scale(prob.unc, u), u};
  return box;
}

ProbEstimate joint_probability(const StandardizedBox& box, const Vector& q, const EstimatorOptions& opts) {
  if (q.size() != box.A.cols()) throw Error(ErrorCode::DimensionMismatch, "Q has the wrong length");
  return unit_box_F(box.z(q), box.sigma_prime.noise, opts);
}

Vector joint_probability_gradient(const StandardizedBox& box, const Vector& q, const EstimatorOptions& opts) {
  if (q.size() != box.A.cols()) throw Error(ErrorCode::DimensionMismatch, "Q has the wrong length");
  return box.A.transpose() * unit_box_F_gradient(box.z(q), box.sigma_prime.noise, opts);
}

double per_bus_probability(const DispatchProblem& prob, int bus, const Vector& q) {
  check_bus(prob, bus);
  if (q.size() != prob.size()) throw Error(ErrorCode::DimensionMismatch, "Q has the wrong length");
  const Eigen::Index i = bus - 1;
  const double mean = prob.sens.R.row(i).dot(prob.p) + prob.sens.X.row(i).dot(q);
  const double sd = std::sqrt(prob.unc.sigma()(i, i));
  return two_sided(prob.vbounds.v_lo(i), prob.vbounds.v_hi(i), mean, sd);
}

std::optional<MeanInterval> per_bus_mean_interval(const DispatchProblem& prob, int bus, double eta) {
  check_bus(prob, bus);
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorCode::InvalidProblem, "eta must lie in (0,1)");
  const Eigen::Index i = bus - 1;
  const double v_lo = prob.vbounds.v_lo(i);
  const double v_hi = prob.vbounds.v_hi(i);
  const double sd = std::sqrt(prob.unc.sigma()(i, i));
  const double center = 0.5 * (v_lo + v_hi);
  if (two_sided(v_lo, v_hi, center, sd) < eta) return std::nullopt;

  auto feasible = [&](double m) { return two_sided(v_lo, v_hi, m, sd) >= eta; };

  // The two-sided mass is unimodal in m with its peak at the center, so each
  // edge is a single crossing.
  double in = center;
  double out = v_hi + kWindowSigmas * sd;
  if (feasible(out)) {
    in = out;
  } else {
    while (out - in > kBisectionWidth) {
      const double mid = 0.5 * (in + out);
      (feasible(mid) ? in : out) = mid;
    }
  }
  const double upper = in;

  in = center;
  out = v_lo - kWindowSigmas * sd;
  if (feasible(out)) {
    in = out;
  } else {
    while (in - out > kBisectionWidth) {
      const double mid = 0.5 * (in + out);
      (feasible(mid) ? in : out) = mid;
    }
  }
  return MeanInterval{in, upper};
}

}  // namespace ccvolt

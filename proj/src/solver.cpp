#include "ccvolt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <optional>

#include "ccvolt/error.hpp"

namespace ccvolt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;
constexpr double kActiveWidth = 1e-6;
constexpr double kNegligibleStep = 1e-8;
constexpr double kNegligibleDecrease = 1e-12;
constexpr double kCurvatureFloor = 1e-10;
constexpr double kFlatTolerance = 1e-13;
constexpr int kFlatIterations = 3;

constexpr double kInitialMultiplier = 1e-2;
constexpr double kBracketFactor = 4.0;
constexpr int kMaxBracketSteps = 12;
constexpr double kMinBracketWidth = 1e-12;
constexpr int kMaxMultiplierSteps = 60;
constexpr int kPolishSteps = 60;

constexpr int kMaxSweeps = 200000;
constexpr double kSlabFeasibilityTol = 1e-8;

Vector project(const Vector& q, const Vector& lo, const Vector& hi) { return q.cwiseMax(lo).cwiseMin(hi); }

/// Joint-probability evaluations for one solve. Inside the optimizer the
/// lattice size is frozen so the merit is a smooth function of Q; the size is
/// grown (never shrunk) by calibrating at points of interest.
class JointOracle {
 public:
  JointOracle(const DispatchProblem& prob, const SolverConfig& cfg) : box_(standardize(prob)) {
    opts_.target_error = cfg.prob_target_error;
    opts_.seed = cfg.seed;
  }

  /// Returns true when the frozen lattice size grew.
  bool calibrate(const Vector& q) {
    const std::int64_t needed = adaptive(q).points;
    if (needed <= opts_.fixed_points) return false;
    opts_.fixed_points = needed;
    return true;
  }

  double value(const Vector& q) const {
    if (cached_q_.size() != q.size() || cached_q_ != q || cached_points_ != opts_.fixed_points) {
      cached_value_ = joint_probability(box_, q, opts_).value;
      cached_q_ = q;
      cached_points_ = opts_.fixed_points;
    }
    return cached_value_;
  }
  Vector gradient(const Vector& q) const { return joint_probability_gradient(box_, q, opts_); }

  ProbEstimate adaptive(const Vector& q) const {
    EstimatorOptions o = opts_;
    o.fixed_points = 0;
    return joint_probability(box_, q, o);
  }

  const StandardizedBox& box() const { return box_; }

 private:
  StandardizedBox box_;
  EstimatorOptions opts_;
  // The gradient of a merit re-reads g at the point just accepted.
  mutable Vector cached_q_;
  mutable double cached_value_ = 0.0;
  mutable std::int64_t cached_points_ = -1;
};

struct Merit {
  std::function<double(const Vector&)> value;  ///< +inf where undefined
  std::function<Vector(const Vector&)> gradient;
};

struct Descent {
  Vector x;
  double f = kInf;
  int iterations = 0;
  bool converged = false;
};

using IterationHook = std::function<void(const Vector&, double)>;

/// BFGS model of the merit Hessian, kept across related descent runs.
struct CurvatureModel {
  Matrix hessian;
  bool scaled = false;

  void reset(Eigen::Index n) {
    hessian = Matrix::Identity(n, n);
    scaled = false;
  }
};

/// Two-metric projected quasi-Newton (Bertsekas): a BFGS step on the free
/// variables, a plain gradient step on variables held at a bound, then
/// halving backtracking along the projection arc from a unit step.
Descent projected_descent(const Merit& merit, const Vector& start, const Vector& lo, const Vector& hi,
                          const SolverConfig& cfg, const IterationHook& hook, CurvatureModel& model) {
  Descent out;
  out.x = project(start, lo, hi);
  out.f = merit.value(out.x);
  if (!std::isfinite(out.f)) return out;
  Vector grad = merit.gradient(out.x);
  const Eigen::Index n = out.x.size();
  if (model.hessian.rows() != n) model.reset(n);
  Matrix& hessian = model.hessian;
  bool& scaled = model.scaled;
  int flat = 0;

  for (; out.iterations < cfg.max_iter; ++out.iterations) {
    const double pg = (project(out.x - grad, lo, hi) - out.x).lpNorm<Eigen::Infinity>();
    if (pg <= cfg.stationarity_tol) {
      out.converged = true;
      return out;
    }

    // Bounds within `width` whose gradient pushes outward stay fixed this step.
    const double width = std::min(kActiveWidth, pg);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = out.x(i) <= lo(i) + width && grad(i) > 0.0;
      const bool at_hi = out.x(i) >= hi(i) - width && grad(i) < 0.0;
      if (!at_lo && !at_hi) free.push_back(i);
    }
    Vector dir = -grad;
    if (!free.empty()) {
      const auto m = static_cast<Eigen::Index>(free.size());
      Matrix sub(m, m);
      Vector rhs(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        rhs(a) = grad(free[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < m; ++b) {
          sub(a, b) = hessian(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
        }
      }
      const Eigen::LLT<Matrix> llt(sub);
      if (llt.info() == Eigen::Success) {
        const Vector step = llt.solve(rhs);
        for (Eigen::Index a = 0; a < m; ++a) dir(free[static_cast<std::size_t>(a)]) = -step(a);
      } else {
        model.reset(n);
      }
    }

    // A full quasi-Newton step that promises almost nothing means the merit is
    // resolved to estimator precision.
    if (-grad.dot(dir) <= kNegligibleDecrease * (1.0 + std::abs(out.f))) {
      out.converged = true;
      return out;
    }

    Vector trial;
    double f_trial = kInf;
    bool accepted = false;
    double t = out.iterations == 0 ? cfg.step_init : 1.0;
    for (int h = 0; h < kMaxHalvings; ++h, t *= 0.5) {
      trial = project(out.x + t * dir, lo, hi);
      if ((trial - out.x).lpNorm<Eigen::Infinity>() <= kNegligibleStep * (1.0 + out.x.lpNorm<Eigen::Infinity>())) break;
      const double decrease = grad.dot(trial - out.x);
      if (!(decrease < 0.0)) {
        // The scaled direction is not a descent direction after projection.
        if (dir == -grad) break;
        dir = -grad;
        model.reset(n);
        t = 2.0 * cfg.step_init;
        continue;
      }
      f_trial = merit.value(trial);
      if (std::isfinite(f_trial) && f_trial <= out.f + kArmijo * decrease) {
        accepted = true;
        break;
      }
    }
    // No decrease along the projection arc: stationary to working precision.
    if (!accepted) {
      out.converged = true;
      return out;
    }

    const Vector s = trial - out.x;
    Vector grad_next = merit.gradient(trial);
    const Vector y = grad_next - grad;
    const double sy = s.dot(y);
    if (sy > kCurvatureFloor * s.norm() * y.norm()) {
      if (!scaled) {
        hessian = Matrix::Identity(n, n) * (y.squaredNorm() / sy);
        scaled = true;
      }
      const Vector hs = hessian * s;
      hessian += y * y.transpose() / sy - hs * hs.transpose() / s.dot(hs);
    }
    const double f_prev = out.f;
    out.x = trial;
    out.f = f_trial;
    grad = std::move(grad_next);
    if (hook) hook(out.x, out.f);

    flat = std::abs(f_prev - out.f) <= kFlatTolerance * (1.0 + std::abs(out.f)) ? flat + 1 : 0;
    if (flat >= kFlatIterations) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

Merit log_probability_merit(const JointOracle& oracle) {
  return Merit{[&oracle](const Vector& q) {
                 const double g = oracle.value(q);
                 return g > 0.0 ? -std::log(g) : kInf;
               },
               [&oracle](const Vector& q) -> Vector {
                 const double g = oracle.value(q);
                 return -oracle.gradient(q) / g;
               }};
}

/// 1/2 ||Q||^2 - lambda log g(Q).
Merit lagrangian_merit(const JointOracle& oracle, double lambda) {
  return Merit{[&oracle, lambda](const Vector& q) {
                 const double g = oracle.value(q);
                 return g > 0.0 ? 0.5 * q.squaredNorm() - lambda * std::log(g) : kInf;
               },
               [&oracle, lambda](const Vector& q) -> Vector {
                 const double g = oracle.value(q);
                 return q - lambda * oracle.gradient(q) / g;
               }};
}

/// Box point that centers every standardized deviation in its unit window.
std::optional<Vector> centered_point(const StandardizedBox& box, const Vector& lo, const Vector& hi) {
  const Eigen::Index n = box.A.cols();
  const Vector center = box.A.partialPivLu().solve(Vector::Constant(n, 0.5) - box.b);
  if (!center.allFinite()) return std::nullopt;
  return project(center, lo, hi);
}

/// The start with the largest g among the given points, after growing the
/// frozen lattice so it suits all of them.
Vector best_start(JointOracle& oracle, const std::vector<Vector>& candidates) {
  for (const Vector& c : candidates) oracle.calibrate(c);
  Vector best = candidates.front();
  double best_g = -1.0;
  for (const Vector& c : candidates) {
    const double g = oracle.value(c);
    if (g > best_g) {
      best_g = g;
      best = c;
    }
  }
  return best;
}

std::vector<Vector> start_candidates(const JointOracle& oracle, const DispatchProblem& prob, const SolverConfig& cfg) {
  const Eigen::Index n = prob.p.size();
  std::vector<Vector> out;
  if (cfg.initial_q) {
    if (cfg.initial_q->size() != n) throw Error(ErrorCode::DimensionMismatch, "initial_q has the wrong length");
    out.push_back(project(*cfg.initial_q, prob.q_lo, prob.q_hi));
  }
  out.push_back(project(Vector::Zero(n), prob.q_lo, prob.q_hi));
  if (auto c = centered_point(oracle.box(), prob.q_lo, prob.q_hi)) out.push_back(*c);
  return out;
}

MaxProbability maximize(JointOracle& oracle, const DispatchProblem& prob, const SolverConfig& cfg,
                        const Vector& start, std::vector<TraceEntry>* trace, int* counter) {
  MaxProbability out;
  out.q = start;
  if (!(oracle.value(start) > 0.0)) {
    const ProbEstimate est = oracle.adaptive(out.q);
    out.g_max = est.value;
    out.error = est.error;
    return out;
  }

  const Merit merit = log_probability_merit(oracle);
  const IterationHook hook = [&](const Vector& q, double f) {
    ++*counter;
    if (trace) trace->push_back({*counter, q.norm(), std::exp(-f)});
  };
  CurvatureModel model;
  for (int pass = 0; pass < 3; ++pass) {
    const Descent d = projected_descent(merit, out.q, prob.q_lo, prob.q_hi, cfg, hook, model);
    out.q = d.x;
    out.iterations += d.iterations;
    out.converged = d.converged;
    if (!oracle.calibrate(out.q)) break;
  }
  const ProbEstimate est = oracle.adaptive(out.q);
  out.g_max = est.value;
  out.error = est.error;
  return out;
}

SolveResult finalize(const JointOracle& oracle, Vector q, SolveStatus status, SolveResult res) {
  res.achieved_g = oracle.adaptive(q).value;
  res.objective = q.norm();
  res.q_star = std::move(q);
  res.status = status;
  return res;
}

double slab_violation(const Vector& x, const Matrix& X, const Vector& lo, const Vector& hi) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double t = X.row(i).dot(x);
    worst = std::max({worst, lo(i) - t, t - hi(i)});
  }
  return worst;
}

}  // namespace

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "Optimal";
    case SolveStatus::Infeasible:
      return "Infeasible";
    case SolveStatus::MaxIterations:
      return "MaxIterations";
  }
  return "Unknown";
}

std::string_view to_string(Framework framework) {
  return framework == Framework::Joint ? "joint" : "per-bus";
}

MaxProbability max_probability(const DispatchProblem& prob, const SolverConfig& cfg) {
  prob.validate();
  JointOracle oracle(prob, cfg);
  int counter = 0;
  const Vector start = best_start(oracle, start_candidates(oracle, prob, cfg));
  return maximize(oracle, prob, cfg, start, nullptr, &counter);
}

SolveResult solve_joint(const DispatchProblem& prob, const SolverConfig& cfg) {
  prob.validate();
  const Eigen::Index n = prob.p.size();
  const double alpha = prob.alpha;
  JointOracle oracle(prob, cfg);
  SolveResult res;

  const Vector origin = project(Vector::Zero(n), prob.q_lo, prob.q_hi);
  if (oracle.adaptive(origin).value >= alpha) return finalize(oracle, origin, SolveStatus::Optimal, std::move(res));
  const Vector start = best_start(oracle, start_candidates(oracle, prob, cfg));

  // Q(lambda) minimizes 1/2 ||Q||^2 - lambda log g(Q) over the box, and
  // h(lambda) = g(Q(lambda)) - alpha increases with lambda. The root is found
  // on a log scale with the Illinois variant of regula falsi.
  CurvatureModel model;
  double model_lambda = 0.0;
  auto inner = [&](double lambda, const Vector& warm) {
    // The merit Hessian is I + lambda * H with H the Hessian of -log g.
    if (model.scaled && model_lambda > 0.0) {
      const Matrix identity = Matrix::Identity(n, n);
      model.hessian = identity + (lambda / model_lambda) * (model.hessian - identity);
    }
    model_lambda = lambda;
    const IterationHook hook = [&](const Vector& q, double f) {
      ++res.iterations;
      res.trace.push_back({res.iterations, q.norm(), std::exp((0.5 * q.squaredNorm() - f) / lambda)});
    };
    return projected_descent(lagrangian_merit(oracle, lambda), warm, prob.q_lo, prob.q_hi, cfg, hook, model).x;
  };

  struct Point {
    double s;  // log lambda
    double h;
    Vector q;
  };
  auto evaluate = [&](double s, const Vector& warm) {
    Vector q = inner(std::exp(s), warm);
    const double h = oracle.value(q) - alpha;
    return Point{s, h, std::move(q)};
  };

  const Point first = evaluate(std::log(kInitialMultiplier), start);
  Point below = first;
  Point above = first;
  bool bracketed = false;
  if (first.h < 0.0) {
    for (int k = 0; k < kMaxBracketSteps && !bracketed; ++k) {
      Point next = evaluate(below.s + std::log(kBracketFactor), below.q);
      bracketed = next.h >= 0.0;
      (bracketed ? above : below) = std::move(next);
    }
  } else {
    // Small multipliers pull Q(lambda) toward the projected origin, where g < alpha.
    for (int k = 0; k < kMaxBracketSteps && !bracketed; ++k) {
      Point next = evaluate(above.s - std::log(kBracketFactor), above.q);
      bracketed = next.h < 0.0;
      (bracketed ? below : above) = std::move(next);
    }
  }

  Vector target;  // a point with g >= alpha to polish toward
  Point current = first;
  if (bracketed) {
    Point lo = below;
    Point hi = above;
    current = std::abs(lo.h) <= std::abs(hi.h) ? lo : hi;
    int retained = 0;  // side kept by the previous step, for the Illinois halving
    for (int k = 0; k < kMaxMultiplierSteps && std::abs(current.h) > cfg.constraint_tol; ++k) {
      double s = (lo.s * hi.h - hi.s * lo.h) / (hi.h - lo.h);
      if (!(s > lo.s && s < hi.s)) s = 0.5 * (lo.s + hi.s);
      Point next = evaluate(s, s - lo.s < hi.s - s ? lo.q : hi.q);
      if (next.h < 0.0) {
        if (retained == -1) hi.h *= 0.5;
        lo = next;
        retained = -1;
      } else {
        if (retained == 1) lo.h *= 0.5;
        hi = next;
        retained = 1;
      }
      current = std::move(next);
      if (hi.s - lo.s < kMinBracketWidth) break;
    }
    target = hi.q;
  } else if (first.h < 0.0) {
    // Even a large multiplier misses alpha: settle feasibility at the maximum.
    const MaxProbability peak = maximize(oracle, prob, cfg, below.q, &res.trace, &res.iterations);
    if (peak.g_max < alpha - 3.0 * cfg.prob_target_error) {
      return finalize(oracle, peak.q, SolveStatus::Infeasible, std::move(res));
    }
    if (oracle.value(peak.q) < alpha) return finalize(oracle, peak.q, SolveStatus::MaxIterations, std::move(res));
    current = below;
    target = peak.q;
  } else {
    return finalize(oracle, above.q, SolveStatus::MaxIterations, std::move(res));
  }

  Vector result = std::abs(current.h) <= cfg.constraint_tol ? current.q : target;
  if (oracle.value(result) < alpha) {
    // g is log-concave, so {t : g(result + t (target - result)) >= alpha} is
    // an interval ending at t = 1.
    double t_lo = 0.0;
    double t_hi = 1.0;
    const Vector dir = target - result;
    double g_hi = oracle.value(target);
    for (int k = 0; k < kPolishSteps && t_hi - t_lo > kMinBracketWidth && g_hi - alpha > cfg.constraint_tol; ++k) {
      const double mid = 0.5 * (t_lo + t_hi);
      const double g_mid = oracle.value(result + mid * dir);
      if (g_mid >= alpha) {
        t_hi = mid;
        g_hi = g_mid;
      } else {
        t_lo = mid;
      }
    }
    result = project(result + t_hi * dir, prob.q_lo, prob.q_hi);
  } else if (oracle.value(result) - alpha > cfg.constraint_tol && current.h < 0.0) {
    result = current.q;
  }
  const SolveStatus status =
      oracle.value(result) >= alpha - cfg.constraint_tol ? SolveStatus::Optimal : SolveStatus::MaxIterations;
  return finalize(oracle, std::move(result), status, std::move(res));
}

SolveResult solve_per_bus(const DispatchProblem& prob, const SolverConfig& cfg) {
  prob.validate();
  const Eigen::Index n = prob.p.size();
  const Matrix& X = prob.sens.X;
  const Vector base = prob.sens.R * prob.p;
  Vector slab_lo(n), slab_hi(n);
  SolveResult res;
  auto infeasible = [&] {
    res.q_star = Vector::Constant(n, kNaN);
    res.achieved_g = kNaN;
    res.objective = kNaN;
    res.status = SolveStatus::Infeasible;
    return res;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto interval = per_bus_mean_interval(prob, static_cast<int>(i + 1), prob.eta);
    if (!interval) return infeasible();
    slab_lo(i) = interval->lo - base(i);
    slab_hi(i) = interval->hi - base(i);
  }
  const Vector row_norm2 = X.rowwise().squaredNorm();

  // Dykstra: set 0 is the Q box, set i+1 the slab of bus i.
  Vector x = Vector::Zero(n);
  std::vector<Vector> increments(static_cast<std::size_t>(n + 1), Vector::Zero(n));
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const Vector before = x;
    {
      const Vector y = x + increments[0];
      x = project(y, prob.q_lo, prob.q_hi);
      increments[0] = y - x;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector y = x + increments[static_cast<std::size_t>(i + 1)];
      const double t = X.row(i).dot(y);
      x = y;
      if (t < slab_lo(i)) x += (slab_lo(i) - t) / row_norm2(i) * X.row(i).transpose();
      if (t > slab_hi(i)) x += (slab_hi(i) - t) / row_norm2(i) * X.row(i).transpose();
      increments[static_cast<std::size_t>(i + 1)] = y - x;
    }
    res.iterations = sweep + 1;
    if ((x - before).lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
  }
  const double box_violation = std::max((prob.q_lo - x).maxCoeff(), (x - prob.q_hi).maxCoeff());
  if (std::max(box_violation, slab_violation(x, X, slab_lo, slab_hi)) > kSlabFeasibilityTol) return infeasible();

  x = project(x, prob.q_lo, prob.q_hi);
  EstimatorOptions opts;
  opts.target_error = cfg.prob_target_error;
  opts.seed = cfg.seed;
  res.achieved_g = joint_probability(standardize(prob), x, opts).value;
  res.objective = x.norm();
  res.q_star = std::move(x);
  res.status = SolveStatus::Optimal;
  return res;
}

std::vector<ComparisonRow> compare_frameworks(const DispatchProblem& prob, const std::vector<double>& alphas,
                                              const std::vector<double>& etas, const SolverConfig& cfg) {
  std::vector<ComparisonRow> rows;
  for (double a : alphas) rows.push_back({Framework::Joint, a, {}});
  for (double e : etas) rows.push_back({Framework::PerBus, e, {}});

  std::vector<std::exception_ptr> failures(rows.size());
  const auto count = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t r = 0; r < count; ++r) {
    auto& row = rows[static_cast<std::size_t>(r)];
    try {
      DispatchProblem instance = prob;
      if (row.framework == Framework::Joint) {
        instance.alpha = row.tolerance;
        row.result = solve_joint(instance, cfg);
      } else {
        instance.eta = row.tolerance;
        row.result = solve_per_bus(instance, cfg);
      }
    } catch (...) {
      failures[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return rows;
}

}  // namespace ccvolt

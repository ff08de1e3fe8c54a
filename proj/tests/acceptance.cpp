// Acceptance gate: one PASS/FAIL line per criterion. Every tolerance is pinned
// here; the process exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ccvolt/cli.hpp"
#include "ccvolt/feeders.hpp"
#include "ccvolt/mvnprob.hpp"
#include "ccvolt/solver.hpp"
#include "support.hpp"

using namespace ccvolt;
using testing::phi_cdf;

namespace {

// criterion 1
constexpr double kTableOneAlpha = 0.88;
constexpr double kTableOneJointTol = 0.01;
constexpr double kTableOnePerBusG = 0.78;
constexpr double kTableOnePerBusTol = 0.02;
constexpr double kTableOneSeconds = 30.0;
// criterion 2
constexpr double kTableTwoAlpha = 0.92;
constexpr double kTableTwoJointTol = 0.01;
constexpr double kTableTwoSeconds = 300.0;
// criterion 3
constexpr int kConcavityPairs = 200;
constexpr double kConcavitySlack = 5.0;
// criterion 4
constexpr double kConvolutionTol = 1e-3;
// criterion 5
constexpr int kGradientInstances = 50;
constexpr double kGradientRelTol = 1e-3;
constexpr double kGradientStep = 1e-4;
constexpr double kGradientTargetError = 1e-6;
constexpr double kGradientQStep = 1e-5;
// Central differences of a value near 1 carry round-off of order eps / h; a
// reference gradient norm below 1e3 times that is noise, not signal.
constexpr double kGradientNoiseFloor = 1e3 * std::numeric_limits<double>::epsilon() / kGradientQStep;
// criterion 6
constexpr int kOracleProblems = 50;
constexpr std::int64_t kOracleSamples = 1000000;
constexpr double kOracleSigmas = 3.0;
// criterion 7
constexpr int kRestartProblems = 20;
constexpr int kRestarts = 5;
constexpr double kRestartSpread = 1e-3;
constexpr int kLadderProblems = 4;
// criterion 8
constexpr double kSurfaceSlackFactor = 2.0;
constexpr double kCsvRelativeRounding = 5e-6;

struct Verdict {
  bool pass = true;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Vector uniform_vector(int n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

Vector random_q(const DispatchProblem& prob, std::mt19937_64& rng, double spread) {
  Vector q = uniform_vector(prob.size(), rng, -spread, spread);
  return q.cwiseMax(prob.q_lo).cwiseMin(prob.q_hi);
}

// Upper bound on |sqrt(ab) - sqrt(a'b')| when |a - a'| <= ea and |b - b'| <= eb.
double geometric_mean_error(double a, double ea, double b, double eb) {
  return std::sqrt((a + ea) * (b + eb)) - std::sqrt(a * b);
}

// ---------------------------------------------------------------------------

Verdict oracle_equivalence() {
  std::mt19937_64 rng(6006);
  Verdict v;
  int failures = 0;
  double worst = 0.0;
  for (int k = 0; k < kOracleProblems; ++k) {
    const int n = 1 + k % 13;
    const DispatchProblem prob = testing::random_problem(n, rng);
    const Vector q = random_q(prob, rng, 0.4);
    const ProbEstimate g = joint_probability(standardize(prob), q);
    const testing::McEstimate mc = testing::raw_event_mc(prob, q, kOracleSamples, 9000 + static_cast<std::uint64_t>(k));
    // the engine reports 3 standard errors; combine at one standard error each
    const double combined = std::hypot(g.error / 3.0, mc.stderr_);
    const double ratio = std::abs(g.value - mc.value) / combined;
    worst = std::max(worst, ratio);
    if (ratio > kOracleSigmas) ++failures;
  }
  v.pass = failures == 0;
  v.detail = fmt("%d/%d problems outside %.0f combined errors (worst %.2f)", failures, kOracleProblems, kOracleSigmas,
                 worst);
  return v;
}

Verdict table_one(const Verdict& oracle) {
  const Clock clock;
  DispatchProblem prob = load(builtin_four_bus()).problem;
  prob.alpha = kTableOneAlpha;
  const SolveResult joint = solve_joint(prob);
  prob.eta = std::cbrt(kTableOneAlpha);
  const SolveResult cube = solve_per_bus(prob);
  prob.eta = kTableOneAlpha;
  const SolveResult same = solve_per_bus(prob);
  const double seconds = clock.seconds();

  const bool joint_ok =
      joint.status == SolveStatus::Optimal && std::abs(joint.achieved_g - kTableOneAlpha) <= kTableOneJointTol;
  const bool cube_ok = cube.status == SolveStatus::Infeasible;
  const bool same_ok =
      same.status == SolveStatus::Optimal && std::abs(same.achieved_g - kTableOnePerBusG) <= kTableOnePerBusTol;
  const bool fast = seconds < kTableOneSeconds;
  const std::string rows = fmt("joint %s g=%.4f; per-bus(cbrt) %s g=%.4f; per-bus(0.88) %s g=%.4f; %.1f s",
                               std::string(to_string(joint.status)).c_str(), joint.achieved_g,
                               std::string(to_string(cube.status)).c_str(), cube.achieved_g,
                               std::string(to_string(same.status)).c_str(), same.achieved_g, seconds);
  if (joint_ok && cube_ok && same_ok && fast) return {true, "full reproduction: " + rows};

  // The printed rows cannot all hold under the symmetric band when the
  // per-bus point at the cube root verifiably meets every marginal: check it
  // with an independent normal CDF.
  bool refuted = cube.status == SolveStatus::Optimal;
  if (refuted) {
    const Vector mean = prob.sens.R * prob.p + prob.sens.X * cube.q_star;
    for (int i = 0; i < prob.size(); ++i) {
      const double s = std::sqrt(prob.unc.sigma()(i, i));
      const double mass = phi_cdf((prob.vbounds.v_hi(i) - mean(i)) / s) - phi_cdf((prob.vbounds.v_lo(i) - mean(i)) / s);
      refuted = refuted && mass >= std::cbrt(kTableOneAlpha) - 1e-9;
      refuted = refuted && cube.q_star(i) >= prob.q_lo(i) && cube.q_star(i) <= prob.q_hi(i);
    }
  }
  const bool ordering = same.status == SolveStatus::Optimal && joint.status == SolveStatus::Optimal &&
                        same.achieved_g < joint.achieved_g;
  Verdict v;
  v.pass = refuted && oracle.pass && ordering && fast;
  v.detail = fmt("%s via downgrade: cube-root per-bus row %s by a verified feasible point; oracle equivalence %s; "
                 "ordering g(per-bus 0.88) < g(joint 0.88) %s [%s]",
                 v.pass ? "met" : "not met", refuted ? "refuted" : "not refuted", oracle.pass ? "holds" : "fails",
                 ordering ? "holds" : "fails", rows.c_str());
  return v;
}

Verdict table_two() {
  const Clock clock;
  const FeederInstance inst = load(builtin_thirteen_bus());
  const double strict = std::pow(kTableTwoAlpha, 1.0 / 12.0);
  const double per_bus_n = std::pow(kTableTwoAlpha, 1.0 / inst.problem.size());
  const auto rows = compare_frameworks(inst.problem, {kTableTwoAlpha}, {strict, per_bus_n, 0.92, 0.98});
  const double seconds = clock.seconds();

  const SolveResult& joint = rows[0].result;
  const SolveResult& r12 = rows[1].result;
  const SolveResult& rn = rows[2].result;
  const SolveResult& r92 = rows[3].result;
  const SolveResult& r98 = rows[4].result;
  Verdict v;
  v.pass = joint.status == SolveStatus::Optimal && std::abs(joint.achieved_g - kTableTwoAlpha) <= kTableTwoJointTol &&
           r12.status == SolveStatus::Infeasible && rn.status == SolveStatus::Infeasible &&
           r92.status == SolveStatus::Optimal && r98.status == SolveStatus::Optimal &&
           r92.achieved_g < kTableTwoAlpha && r98.achieved_g < kTableTwoAlpha && r92.achieved_g < r98.achieved_g &&
           seconds < kTableTwoSeconds;
  v.detail = fmt("joint %s g=%.4f; eta^(1/12) %s; eta^(1/%d) %s; eta=0.92 %s g=%.4f; eta=0.98 %s g=%.4f; %.1f s",
                 std::string(to_string(joint.status)).c_str(), joint.achieved_g,
                 std::string(to_string(r12.status)).c_str(), inst.problem.size(),
                 std::string(to_string(rn.status)).c_str(), std::string(to_string(r92.status)).c_str(), r92.achieved_g,
                 std::string(to_string(r98.status)).c_str(), r98.achieved_g, seconds);
  return v;
}

Verdict log_concavity() {
  std::mt19937_64 rng(3003);
  int violations = 0;
  int checks = 0;
  for (int n : {2, 3, 5}) {
    const GaussianUncertainty sigma = GaussianUncertainty::validate(testing::random_covariance(n, rng, 0.2, 0.6));
    for (int k = 0; k < kConcavityPairs; ++k) {
      const Vector a = uniform_vector(n, rng, -0.5, 1.5);
      const Vector b = uniform_vector(n, rng, -0.5, 1.5);
      const ProbEstimate fa = unit_box_F(a, sigma);
      const ProbEstimate fb = unit_box_F(b, sigma);
      const ProbEstimate fm = unit_box_F(0.5 * (a + b), sigma);
      const double slack = kConcavitySlack * (fm.error + geometric_mean_error(fa.value, fa.error, fb.value, fb.error));
      if (fm.value < std::sqrt(fa.value * fb.value) - slack) ++violations;
      ++checks;
    }
    DispatchProblem prob = testing::random_problem(n, rng);
    for (int k = 0; k < kConcavityPairs; ++k) {
      if (k > 0 && k % 20 == 0) prob = testing::random_problem(n, rng);
      const StandardizedBox box = standardize(prob);
      const Vector qa = random_q(prob, rng, 0.5);
      const Vector qb = random_q(prob, rng, 0.5);
      const ProbEstimate ga = joint_probability(box, qa);
      const ProbEstimate gb = joint_probability(box, qb);
      const ProbEstimate gm = joint_probability(box, 0.5 * (qa + qb));
      const double slack = kConcavitySlack * (gm.error + geometric_mean_error(ga.value, ga.error, gb.value, gb.error));
      if (gm.value < std::sqrt(ga.value * gb.value) - slack) ++violations;
      ++checks;
    }
  }
  return {violations == 0, fmt("%d violations beyond %.0fx estimator error in %d midpoint checks (F and g, N = 2, 3, 5)",
                               violations, kConcavitySlack, checks)};
}

Verdict convolution() {
  // F(z) = integral over s in [0,1]^2 of f(z - s) ds, f the N(0, sigma) density
  const Matrix sigma = cli::surface_builtin_sigma();
  const GaussianUncertainty noise = GaussianUncertainty::validate(sigma);
  const Matrix inv = sigma.inverse();
  const double norm = 1.0 / (2.0 * M_PI * std::sqrt(sigma.determinant()));
  const testing::GaussLegendre gl(16);
  constexpr int kPanels = 8;
  auto convolve = [&](const Vector& z) {
    double total = 0.0;
    const double h = 1.0 / kPanels;
    for (int a = 0; a < kPanels; ++a)
      for (int b = 0; b < kPanels; ++b)
        for (std::size_t i = 0; i < gl.nodes.size(); ++i)
          for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
            const double s1 = h * (a + 0.5 * (gl.nodes[i] + 1.0));
            const double s2 = h * (b + 0.5 * (gl.nodes[j] + 1.0));
            const double x = z(0) - s1, y = z(1) - s2;
            const double q = inv(0, 0) * x * x + 2.0 * inv(0, 1) * x * y + inv(1, 1) * y * y;
            total += gl.weights[i] * gl.weights[j] * 0.25 * h * h * norm * std::exp(-0.5 * q);
          }
    return total;
  };
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const Vector z{{-1.0 + 0.75 * i, -1.0 + 0.75 * j}};
      worst = std::max(worst, std::abs(unit_box_F(z, noise).value - convolve(z)));
    }
  }
  return {worst <= kConvolutionTol, fmt("max |F - convolution| = %.2e on 5x5 grid over [-1,2]^2", worst)};
}

Verdict gradients() {
  std::mt19937_64 rng(5005);
  EstimatorOptions tight;
  tight.target_error = kGradientTargetError;
  double worst_f = 0.0, worst_g = 0.0;
  int failures = 0;
  for (int k = 0; k < kGradientInstances; ++k) {
    const int n = 1 + k % 6;
    // grad F: central differences with common random numbers
    const GaussianUncertainty sigma = GaussianUncertainty::validate(testing::random_covariance(n, rng, 0.2, 0.5));
    const Vector z = Vector::Constant(n, 0.5) + uniform_vector(n, rng, -0.4, 0.4);
    EstimatorOptions frozen = tight;
    frozen.fixed_points = unit_box_F(z, sigma, tight).points;
    const Vector analytic = unit_box_F_gradient(z, sigma, tight);
    Vector fd(n);
    for (int i = 0; i < n; ++i) {
      Vector up = z, down = z;
      up(i) += kGradientStep;
      down(i) -= kGradientStep;
      fd(i) = (unit_box_F(up, sigma, frozen).value - unit_box_F(down, sigma, frozen).value) / (2.0 * kGradientStep);
    }
    const double rel_f = (analytic - fd).norm() / fd.norm();

    // grad g on a random dispatch problem, at a random point of the standardized
    // box; the centre itself is stationary and would make the ratio meaningless
    const DispatchProblem prob = testing::random_problem(n, rng);
    const StandardizedBox box = standardize(prob);
    const Vector target = Vector::Constant(n, 0.5) + uniform_vector(n, rng, -0.45, 0.45);
    const Vector q = box.A.fullPivLu().solve(target - box.b);
    EstimatorOptions frozen_g = tight;
    frozen_g.fixed_points = joint_probability(box, q, tight).points;
    const Vector analytic_g = joint_probability_gradient(box, q, tight);
    Vector fd_g(n);
    for (int i = 0; i < n; ++i) {
      Vector up = q, down = q;
      up(i) += kGradientQStep;
      down(i) -= kGradientQStep;
      fd_g(i) = (joint_probability(box, up, frozen_g).value - joint_probability(box, down, frozen_g).value) /
                (2.0 * kGradientQStep);
    }
    const double rel_g = (analytic_g - fd_g).norm() / std::max(fd_g.norm(), kGradientNoiseFloor);
    worst_f = std::max(worst_f, rel_f);
    worst_g = std::max(worst_g, rel_g);
    if (!(rel_f <= kGradientRelTol) || !(rel_g <= kGradientRelTol)) ++failures;
  }
  return {failures == 0, fmt("%d/%d instances above %.0e; worst relative L2 error grad F %.2e, grad g %.2e", failures,
                             kGradientInstances, kGradientRelTol, worst_f, worst_g)};
}

double alpha_between(const DispatchProblem& prob, double frac) {
  const double g0 = joint_probability(standardize(prob), Vector::Zero(prob.size())).value;
  return g0 + frac * (max_probability(prob).g_max - g0);
}

Verdict global_optimality() {
  std::mt19937_64 rng(7007);
  double worst_spread = 0.0;
  int spread_failures = 0;
  int status_failures = 0;
  int ladder_failures = 0;
  for (int k = 0; k < kRestartProblems; ++k) {
    const int n = 2 + k % 5;
    DispatchProblem prob = testing::random_problem(n, rng);
    prob.alpha = alpha_between(prob, 0.6);
    double lo = INFINITY, hi = -INFINITY;
    for (int r = 0; r < kRestarts; ++r) {
      SolverConfig cfg;
      if (r > 0) cfg.initial_q = uniform_vector(n, rng, -0.5, 0.5);
      const SolveResult res = solve_joint(prob, cfg);
      if (res.status != SolveStatus::Optimal) ++status_failures;
      lo = std::min(lo, res.objective);
      hi = std::max(hi, res.objective);
    }
    worst_spread = std::max(worst_spread, hi - lo);
    if (!(hi - lo <= kRestartSpread)) ++spread_failures;

    if (k < kLadderProblems) {
      double last = -1.0;
      for (double frac : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        DispatchProblem step = prob;
        step.alpha = alpha_between(prob, frac);
        const SolveResult res = solve_joint(step);
        if (res.status != SolveStatus::Optimal || res.objective < last) ++ladder_failures;
        last = res.objective;
      }
    }
  }
  return {spread_failures == 0 && status_failures == 0 && ladder_failures == 0,
          fmt("worst %d-restart spread %.2e over %d problems (%d above %.0e, %d non-optimal); %d ladder violations on "
              "%d five-point alpha ladders",
              kRestarts, worst_spread, kRestartProblems, spread_failures, kRestartSpread, status_failures,
              ladder_failures, kLadderProblems)};
}

Verdict surface() {
  cli::Options opts;
  opts.feeder = "surface";
  const cli::RunReport report = cli::cmd_surface(opts);
  const int steps = opts.grid.steps;
  if (static_cast<int>(report.table.size()) != 1 + steps * steps) return {false, "wrong row count"};
  std::vector<double> log_f(static_cast<std::size_t>(steps * steps));
  for (std::size_t r = 1; r < report.table.size(); ++r) log_f[r - 1] = std::stod(report.table[r][2]);
  // slack of one cell: the estimator's absolute target turned into log
  // space, plus the 6-significant-digit rounding of the CSV
  auto cell_slack = [&](int i, int j) {
    const double l = log_f[static_cast<std::size_t>(i * steps + j)];
    return kSurfaceTargetError / std::exp(l) + kCsvRelativeRounding * std::abs(l);
  };
  auto at = [&](int i, int j) { return log_f[static_cast<std::size_t>(i * steps + j)]; };
  int violations = 0;
  double max_second = -INFINITY;
  for (int i = 0; i < steps; ++i) {
    for (int j = 1; j + 1 < steps; ++j) {
      for (bool along_rows : {true, false}) {
        const auto get = [&](int a) { return along_rows ? at(i, a) : at(a, i); };
        const auto slack_of = [&](int a) { return along_rows ? cell_slack(i, a) : cell_slack(a, i); };
        const double second = get(j - 1) - 2.0 * get(j) + get(j + 1);
        const double slack = slack_of(j - 1) + 2.0 * slack_of(j) + slack_of(j + 1);
        max_second = std::max(max_second, second);
        if (!std::isfinite(second) || second > kSurfaceSlackFactor * slack) ++violations;
      }
    }
  }
  return {violations == 0, fmt("%d of %d second differences above %.0fx slack; largest second difference %.3e",
                               violations, 2 * steps * (steps - 2), kSurfaceSlackFactor, max_second)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Verdict verdict;
  };
  std::vector<Criterion> results;
  const Clock total;
  auto timed = [](const char* name, const std::function<Verdict()>& f) {
    const Clock c;
    Verdict v = f();
    std::fprintf(stderr, "  (%s: %.1f s)\n", name, c.seconds());
    return v;
  };

  const Verdict oracle = timed("oracle equivalence", oracle_equivalence);
  results.push_back({1, "Table I reproduction (four-bus)", timed("four-bus", [&] { return table_one(oracle); })});
  results.push_back({2, "Table II pattern (thirteen-bus)", timed("thirteen-bus", table_two)});
  results.push_back({3, "log-concavity midpoint suite", timed("log-concavity", log_concavity)});
  results.push_back({4, "convolution identity", timed("convolution", convolution)});
  results.push_back({5, "gradient checks", timed("gradients", gradients)});
  results.push_back({6, "oracle equivalence", oracle});
  results.push_back({7, "restarts and alpha monotonicity", timed("restarts", global_optimality)});
  results.push_back({8, "log F surface concavity", timed("surface", surface)});

  int failed = 0;
  for (const auto& c : results) {
    std::printf("%s criterion %d: %s: %s\n", c.verdict.pass ? "PASS" : "FAIL", c.id, c.name, c.verdict.detail.c_str());
    failed += c.verdict.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(results.size()) - failed, results.size(),
              total.seconds());
  return failed == 0 ? 0 : 1;
}

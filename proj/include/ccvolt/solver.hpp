#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "ccvolt/chance.hpp"

namespace ccvolt {

enum class SolveStatus { Optimal, Infeasible, MaxIterations };
std::string_view to_string(SolveStatus status);

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double g = 0.0;
};

struct SolveResult {
  Vector q_star;
  double achieved_g = 0.0;  ///< joint probability at q_star
  double objective = 0.0;   ///< ||q_star||_2
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  std::vector<TraceEntry> trace;
};

struct SolverConfig {
  double constraint_tol = 1e-4;      ///< |g(Q*) - alpha| target when the constraint is active
  double step_init = 1.0;            ///< first trial step of every inner descent run
  int max_iter = 400;                ///< iterations per inner descent run
  double prob_target_error = 1e-4;   ///< absolute error target of every probability evaluation
  double stationarity_tol = 1e-7;    ///< ||P(Q - grad) - Q||_inf at which a descent run stops
  std::uint64_t seed = kEstimatorSeed;
  std::optional<Vector> initial_q;   ///< start point (projected onto the Q box)
};

struct MaxProbability {
  Vector q;
  double g_max = 0.0;
  double error = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Maximizes log g over the Q box with a two-metric projected quasi-Newton
/// method. log g is concave, so a stationary point is the global maximum.
MaxProbability max_probability(const DispatchProblem& prob, const SolverConfig& cfg = {});

/// min ||Q||_2 s.t. g(Q) >= alpha, q_lo <= Q <= q_hi.
///
/// Returns the box point closest to 0 when it already meets alpha. Otherwise
/// bisects on the multiplier lambda of min 1/2||Q||^2 - lambda log g(Q)
/// (strictly convex, solved by projected quasi-Newton) until g hits alpha, then
/// polishes along the segment toward the max-probability point so the returned
/// point satisfies the constraint. Infeasible when max g < alpha - 3 *
/// prob_target_error.
SolveResult solve_joint(const DispatchProblem& prob, const SolverConfig& cfg = {});

/// min ||Q||_2 s.t. g_i(Q) >= eta for every bus, in the Q box. Each marginal
/// constraint becomes a slab on R_i P + X_i Q, and the minimum-norm point of
/// box and slabs is found with Dykstra's alternating projections.
/// achieved_g reports the joint probability at the result.
SolveResult solve_per_bus(const DispatchProblem& prob, const SolverConfig& cfg = {});

enum class Framework { Joint, PerBus };
std::string_view to_string(Framework framework);

struct ComparisonRow {
  Framework framework = Framework::Joint;
  double tolerance = 0.0;
  SolveResult result;
};

/// One joint row per alpha, then one per-bus row per eta, in input order.
/// Rows are solved concurrently.
std::vector<ComparisonRow> compare_frameworks(const DispatchProblem& prob, const std::vector<double>& alphas,
                                              const std::vector<double>& etas, const SolverConfig& cfg = {});

}  // namespace ccvolt

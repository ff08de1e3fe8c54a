#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ccvolt/mvnprob.hpp"

namespace ccvolt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInfeasible = 2;

/// 2x2 covariance of the log-concavity surface builtin.
Matrix surface_builtin_sigma();

struct Grid {
  double min = -2.0;
  double max = 3.0;
  int steps = 51;
};

/// Parsed command-line options shared by every subcommand.
struct Options {
  std::string feeder;                       ///< path, or a builtin name
  std::string mode = "joint";               ///< joint | per-bus
  std::optional<double> alpha;              ///< overrides the feeder's alpha
  std::optional<std::vector<double>> etas;  ///< overrides the feeder's etas; may be empty
  std::optional<double> tol;                ///< |g - alpha| stopping tolerance of the joint solver
  std::optional<std::string> out;           ///< CSV destination; stdout when absent
  std::uint64_t seed = kEstimatorSeed;
  Grid grid;
  bool pretty = false;
};

/// What a subcommand produced. `table` holds the CSV header row first.
struct RunReport {
  std::string instance;
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> notes;  ///< human-readable lines for stdout
  double seconds = 0.0;
  std::uint64_t seed = kEstimatorSeed;
  int exit_code = kExitOk;
};

/// Six significant digits; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double v);

/// "# key=value" lines echoing instance, command, seed and config, then the
/// table as comma-separated rows. Contains no timing, so repeated runs match
/// byte for byte.
std::string to_csv(const RunReport& report);
/// The same table with aligned columns.
std::string to_pretty(const RunReport& report);

RunReport cmd_solve(const Options& opts);
RunReport cmd_compare(const Options& opts);
RunReport cmd_surface(const Options& opts);
RunReport cmd_validate(const Options& opts);

/// Full command-line entry point: parses flags, runs the subcommand, writes
/// the CSV (only on success) and returns the exit code. Errors go to stderr.
int run(int argc, const char* const* argv);

}  // namespace ccvolt::cli

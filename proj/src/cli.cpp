#include "ccvolt/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccvolt/error.hpp"
#include "ccvolt/feeders.hpp"
#include "ccvolt/solver.hpp"

namespace ccvolt::cli {

namespace {

constexpr const char* kSurfaceBuiltin = "surface";

FeederSpec resolve_feeder(const std::string& name_or_path) {
  if (name_or_path.empty()) throw Error(ErrorCode::Io, "--feeder is required");
  if (auto builtin = builtin_feeder(name_or_path)) return *builtin;
  return read_feeder_file(name_or_path);
}

SolverConfig solver_config(const Options& opts) {
  SolverConfig cfg;
  cfg.seed = opts.seed;
  if (opts.tol) {
    if (!(*opts.tol > 0.0 && *opts.tol < 1.0)) throw Error(ErrorCode::InvalidProblem, "--tol must lie in (0,1)");
    cfg.constraint_tol = *opts.tol;
  }
  return cfg;
}

std::vector<double> etas_of(const Options& opts, const FeederSpec& spec) {
  return opts.etas ? *opts.etas : spec.etas;
}

void echo_common(RunReport& report, const Options& opts, const SolverConfig& cfg) {
  report.seed = opts.seed;
  report.config.emplace_back("constraint_tol", format_number(cfg.constraint_tol));
  report.config.emplace_back("prob_target_error", format_number(cfg.prob_target_error));
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int exit_code_for(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return kExitOk;
    case SolveStatus::Infeasible:
      return kExitInfeasible;
    case SolveStatus::MaxIterations:
      return kExitError;
  }
  return kExitError;
}

std::string matrix_text(const Matrix& m) {
  std::ostringstream out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << "  ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_number(m(r, c));
    out << '\n';
  }
  return out.str();
}

Matrix surface_sigma(const std::string& source) {
  if (source.empty() || source == kSurfaceBuiltin) return surface_builtin_sigma();
  // Only the covariance is read: a feeder file or a bare {"covariance": ...} qualifies.
  std::ifstream in(source, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + source);
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (!doc.is_object() || !doc.contains("covariance")) {
    throw Error(ErrorCode::ParseError, "field 'covariance': missing");
  }
  const auto& cov = doc["covariance"];
  auto matrix = [](const nlohmann::json& v) {
    Matrix m(static_cast<Eigen::Index>(v.size()), v.empty() ? 0 : static_cast<Eigen::Index>(v[0].size()));
    for (std::size_t r = 0; r < v.size(); ++r) {
      if (v[r].size() != static_cast<std::size_t>(m.cols())) throw Error(ErrorCode::ParseError, "ragged matrix");
      for (std::size_t c = 0; c < v[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r][c].get<double>();
    }
    return m;
  };
  try {
    if (cov.contains("dense")) return matrix(cov["dense"]);
    if (cov.contains("stddev") && cov.contains("correlation")) {
      const Matrix corr = matrix(cov["correlation"]);
      Vector s(static_cast<Eigen::Index>(cov["stddev"].size()));
      for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = cov["stddev"][static_cast<std::size_t>(i)].get<double>();
      if (corr.rows() != s.size()) throw Error(ErrorCode::DimensionMismatch, "correlation does not match stddev");
      return s.asDiagonal() * corr * s.asDiagonal();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("field 'covariance': ") + e.what());
  }
  throw Error(ErrorCode::ParseError, "field 'covariance': expected 'dense' or 'stddev' + 'correlation'");
}

std::vector<double> parse_grid_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw CLI::ValidationError("--grid", "expected min,max,steps");
    values.push_back(v);
  }
  if (values.size() != 3) throw CLI::ValidationError("--grid", "expected min,max,steps");
  return values;
}

}  // namespace

Matrix surface_builtin_sigma() { return Matrix{{0.9, 0.5}, {0.5, 0.6}}; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string to_csv(const RunReport& report) {
  std::ostringstream out;
  out << "# instance=" << report.instance << '\n';
  out << "# command=" << report.command << '\n';
  out << "# seed=" << report.seed << '\n';
  for (const auto& [key, value] : report.config) out << "# " << key << '=' << value << '\n';
  for (const auto& row : report.table) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << '\n';
  }
  return out.str();
}

std::string to_pretty(const RunReport& report) {
  std::vector<std::size_t> width;
  for (const auto& row : report.table) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  out << report.command << " on " << report.instance << " (seed " << report.seed << ")\n";
  for (std::size_t r = 0; r < report.table.size(); ++r) {
    const auto& row = report.table[r];
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "  " : "") << row[c] << std::string(width[c] - row[c].size(), ' ');
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

RunReport cmd_solve(const Options& opts) {
  const Stopwatch clock;
  const FeederSpec spec = resolve_feeder(opts.feeder);
  FeederInstance inst = load(spec);
  const SolverConfig cfg = solver_config(opts);

  RunReport report;
  report.instance = spec.name;
  report.command = "solve";
  report.config.emplace_back("mode", opts.mode);
  SolveResult result;
  if (opts.mode == "joint") {
    if (opts.alpha) inst.problem.alpha = *opts.alpha;
    inst.problem.validate();
    report.config.emplace_back("alpha", format_number(inst.problem.alpha));
    result = solve_joint(inst.problem, cfg);
  } else if (opts.mode == "per-bus") {
    const std::vector<double> etas = etas_of(opts, spec);
    if (opts.etas && etas.size() != 1) throw Error(ErrorCode::InvalidProblem, "per-bus solve takes one --eta");
    inst.problem.eta = etas.empty() ? inst.problem.alpha : etas.front();
    inst.problem.validate();
    report.config.emplace_back("eta", format_number(inst.problem.eta));
    result = solve_per_bus(inst.problem, cfg);
  } else {
    throw Error(ErrorCode::InvalidProblem, "--mode must be joint or per-bus, got '" + opts.mode + "'");
  }
  echo_common(report, opts, cfg);

  report.table.push_back({"bus", "q_star"});
  for (Eigen::Index i = 0; i < result.q_star.size(); ++i) {
    report.table.push_back({std::to_string(i + 1), format_number(result.q_star(i))});
  }
  report.table.push_back({"objective", format_number(result.objective)});
  report.table.push_back({"achieved_g", format_number(result.achieved_g)});
  report.table.push_back({"status", std::string(to_string(result.status))});
  report.exit_code = exit_code_for(result.status);
  report.seconds = clock.seconds();
  report.notes.push_back(std::string(to_string(result.status)) + ", ||Q*|| = " + format_number(result.objective) +
                         ", g(Q*) = " + format_number(result.achieved_g) + ", " +
                         std::to_string(result.iterations) + " iterations");
  return report;
}

RunReport cmd_compare(const Options& opts) {
  const Stopwatch clock;
  const FeederSpec spec = resolve_feeder(opts.feeder);
  const FeederInstance inst = load(spec);
  const SolverConfig cfg = solver_config(opts);
  const double alpha = opts.alpha.value_or(spec.alpha);
  const std::vector<double> etas = etas_of(opts, spec);

  RunReport report;
  report.instance = spec.name;
  report.command = "compare";
  report.config.emplace_back("alpha", format_number(alpha));
  std::string eta_list;
  for (double e : etas) eta_list += (eta_list.empty() ? "" : ";") + format_number(e);
  report.config.emplace_back("etas", eta_list);
  echo_common(report, opts, cfg);

  const auto rows = compare_frameworks(inst.problem, {alpha}, etas, cfg);
  report.table.push_back({"framework", "tolerance", "status", "joint_g", "objective"});
  for (const auto& row : rows) {
    report.table.push_back({std::string(to_string(row.framework)), format_number(row.tolerance),
                            std::string(to_string(row.result.status)), format_number(row.result.achieved_g),
                            format_number(row.result.objective)});
  }
  report.seconds = clock.seconds();
  return report;
}

RunReport cmd_surface(const Options& opts) {
  const Stopwatch clock;
  const GaussianUncertainty noise = GaussianUncertainty::validate(surface_sigma(opts.feeder));
  if (noise.dimension() != 2) {
    throw Error(ErrorCode::DimensionMismatch, "surface needs a 2x2 covariance, got " +
                                                  std::to_string(noise.dimension()) + "x" +
                                                  std::to_string(noise.dimension()));
  }
  const Grid& g = opts.grid;
  if (g.steps < 1 || !std::isfinite(g.min) || !std::isfinite(g.max) || (g.steps > 1 && !(g.min < g.max))) {
    throw Error(ErrorCode::InvalidProblem, "--grid needs min < max and steps >= 1");
  }

  RunReport report;
  report.instance = opts.feeder.empty() ? kSurfaceBuiltin : opts.feeder;
  report.command = "surface";
  report.seed = opts.seed;
  report.config.emplace_back("grid", format_number(g.min) + ";" + format_number(g.max) + ";" + std::to_string(g.steps));
  report.config.emplace_back("target_error", format_number(kSurfaceTargetError));

  EstimatorOptions est;
  est.target_error = kSurfaceTargetError;
  est.seed = opts.seed;
  const double h = g.steps > 1 ? (g.max - g.min) / (g.steps - 1) : 0.0;
  report.table.push_back({"z1", "z2", "logF"});
  for (int i = 0; i < g.steps; ++i) {
    for (int j = 0; j < g.steps; ++j) {
      const Vector z{{g.min + i * h, g.min + j * h}};
      const double f = unit_box_F(z, noise, est).value;
      report.table.push_back({format_number(z(0)), format_number(z(1)), format_number(f > 0.0 ? std::log(f) : -INFINITY)});
    }
  }
  report.seconds = clock.seconds();
  return report;
}

RunReport cmd_validate(const Options& opts) {
  const Stopwatch clock;
  const FeederSpec spec = resolve_feeder(opts.feeder);
  const FeederInstance inst = load(spec);
  RunReport report;
  report.instance = spec.name;
  report.command = "validate";
  report.seed = opts.seed;
  report.notes.push_back("valid: " + spec.name + " with N = " + std::to_string(spec.size()));
  report.notes.push_back("R =\n" + matrix_text(inst.problem.sens.R));
  report.notes.push_back("X =\n" + matrix_text(inst.problem.sens.X));
  report.seconds = clock.seconds();
  return report;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Joint chance-constrained reactive power dispatch on radial feeders"};
  app.require_subcommand(1);
  Options opts;
  std::string grid_text;
  std::vector<double> etas;
  double alpha = 0.0;
  double tol = 0.0;
  std::string out;

  auto add_feeder = [&](CLI::App* sub) {
    sub->add_option("--feeder", opts.feeder, "feeder file, or builtin four-bus / thirteen-bus")->required();
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out, "CSV output path (stdout when omitted)");
    sub->add_option("--seed", opts.seed, "estimator seed");
    sub->add_flag("--pretty", opts.pretty, "print an aligned table instead of CSV on stdout");
  };

  CLI::App* solve = app.add_subcommand("solve", "minimum-norm dispatch for one tolerance");
  add_feeder(solve);
  add_common(solve);
  solve->add_option("--mode", opts.mode, "joint or per-bus")->check(CLI::IsMember({"joint", "per-bus"}));
  solve->add_option("--alpha", alpha, "joint tolerance (default: feeder alpha)");
  solve->add_option("--eta", etas, "per-bus tolerance (default: first feeder eta)");
  solve->add_option("--tol", tol, "|g - alpha| stopping tolerance");

  CLI::App* compare = app.add_subcommand("compare", "joint vs per-bus over tolerances");
  add_feeder(compare);
  add_common(compare);
  compare->add_option("--alpha", alpha, "joint tolerance (default: feeder alpha)");
  compare->add_option("--eta", etas, "per-bus tolerances; bare --eta means none")->expected(0, -1);
  compare->add_option("--tol", tol, "|g - alpha| stopping tolerance");

  CLI::App* surface = app.add_subcommand("surface", "log F over a 2-D grid");
  surface->add_option("--feeder", opts.feeder, "file with a 2x2 covariance, or builtin 'surface'");
  add_common(surface);
  surface->add_option("--grid", grid_text, "min,max,steps");

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a feeder and print R, X");
  add_feeder(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  auto given = [chosen](const char* name) {
    const CLI::Option* o = chosen->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (given("--alpha")) opts.alpha = alpha;
  if (given("--eta")) {
    // a bare --eta leaves an empty placeholder result rather than no results
    std::vector<double> listed;
    for (const std::string& r : chosen->get_option("--eta")->results()) {
      if (!r.empty() && r != "{}") listed.push_back(std::stod(r));
    }
    opts.etas = listed;
  }
  if (given("--tol")) opts.tol = tol;
  if (!out.empty()) opts.out = out;

  try {
    if (!grid_text.empty()) {
      const auto v = parse_grid_values(grid_text);
      if (v[2] != std::floor(v[2])) throw Error(ErrorCode::InvalidProblem, "--grid steps must be an integer");
      opts.grid = Grid{v[0], v[1], static_cast<int>(v[2])};
    }
    RunReport report;
    if (chosen == solve) {
      report = cmd_solve(opts);
    } else if (chosen == compare) {
      report = cmd_compare(opts);
    } else if (chosen == surface) {
      report = cmd_surface(opts);
    } else {
      report = cmd_validate(opts);
      for (const auto& line : report.notes) std::cout << line << (line.back() == '\n' ? "" : "\n");
      return kExitOk;
    }

    const std::string csv = to_csv(report);
    if (opts.out) {
      std::ofstream file(*opts.out, std::ios::binary);
      if (!file || !(file << csv) || !file.flush()) throw Error(ErrorCode::Io, "cannot write " + *opts.out);
      if (opts.pretty) std::cout << to_pretty(report);
    } else {
      std::cout << (opts.pretty ? to_pretty(report) : csv);
    }
    std::ostream& info = opts.out ? std::cout : std::cerr;
    for (const auto& line : report.notes) info << line << '\n';
    char elapsed[64];
    std::snprintf(elapsed, sizeof elapsed, "%s finished in %.3f s\n", report.command.c_str(), report.seconds);
    info << elapsed;
    return report.exit_code;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const Error& e) {
    std::cerr << (chosen == validate_cmd ? "invalid: " : "error: ") << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace ccvolt::cli

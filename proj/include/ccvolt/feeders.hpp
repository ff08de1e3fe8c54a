#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ccvolt/chance.hpp"
#include "ccvolt/network.hpp"
#include "ccvolt/uncertainty.hpp"

namespace ccvolt {

struct DenseCovariance {
  Matrix sigma;
};

/// sigma = diag(stddev) * correlation * diag(stddev).
struct CorrelatedCovariance {
  Vector stddev;
  Matrix correlation;
};

using CovarianceSpec = std::variant<DenseCovariance, CorrelatedCovariance>;

/// Everything needed to pose a dispatch problem on one feeder. Per-bus vectors
/// have length N and are indexed by bus id - 1; bus 0 is the reference.
struct FeederSpec {
  std::string name;
  std::vector<Bus> buses;  ///< including bus 0; injections live here
  std::vector<Line> lines;
  Vector q_lo;             ///< may hold -infinity
  Vector q_hi;             ///< may hold +infinity
  Vector v_lo;
  Vector v_hi;
  CovarianceSpec covariance;
  double alpha = 0.9;
  std::vector<double> etas;

  /// Number of controllable buses.
  int size() const { return static_cast<int>(buses.size()) - 1; }
};

/// Exact field-by-field equality.
bool operator==(const FeederSpec& a, const FeederSpec& b);

GaussianUncertainty covariance_of(const FeederSpec& spec);

/// Runs every check a loaded instance relies on. Dimension and range problems
/// throw ValidationError naming the invariant; network and covariance problems
/// keep their own codes (CycleDetected, NotSymmetric, ...).
void validate(const FeederSpec& spec);

/// Validated feeder with its derived network and dispatch problem.
struct FeederInstance {
  FeederSpec spec;
  RadialNetwork network;
  DispatchProblem problem;  ///< alpha from the spec; eta = first of etas (or alpha)
};

FeederInstance load(const FeederSpec& spec);

/// JSON document, see docs/feeder-format.md. Throws ParseError (with line and
/// column for syntax errors, the field path otherwise) or the validation codes.
FeederSpec parse_feeder(std::string_view text);
/// Inverse of parse_feeder; doubles are written in shortest round-trip form.
std::string serialize_feeder(const FeederSpec& spec);

/// Reads and parses a feeder file. Throws Io when it cannot be read.
FeederSpec read_feeder_file(const std::filesystem::path& path);

/// Line 0-1-2-3 with the published impedances and covariance.
FeederSpec builtin_four_bus();
/// Knobs of the synthesized 13-bus covariance and voltage band.
struct ThirteenBusParams {
  double stddev = 0.017;             ///< nominal per-bus noise standard deviation, p.u.
  double stddev_jitter = 0.2;        ///< relative spread of the per-bus deviations
  double correlation_length = 0.15;  ///< decay length of correlation in electrical distance, p.u. |z|
  double voltage_band = 0.05;        ///< symmetric |v| limit, p.u.
  std::uint64_t seed = 13;
};

/// Single-phase reduction of the IEEE 13-node test feeder. Correlation decays
/// as exp(-d / correlation_length) with d the path impedance magnitude between
/// buses; per-bus deviations are stddev * (1 + stddev_jitter * (2u - 1)) with
/// u drawn from counter_uniform(seed, bus). See docs/thirteen-bus.md.
FeederSpec thirteen_bus(const ThirteenBusParams& params);
/// thirteen_bus with the default parameters: the repo's canonical instance.
FeederSpec builtin_thirteen_bus();

/// "four-bus" or "thirteen-bus".
std::optional<FeederSpec> builtin_feeder(std::string_view name);

}  // namespace ccvolt

#include "ccvolt/feeders.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ccvolt/error.hpp"
#include "ccvolt/normal.hpp"

namespace ccvolt {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same(const Vector& a, const Vector& b) { return a.size() == b.size() && a == b; }
bool same(const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; }

bool same(const CovarianceSpec& a, const CovarianceSpec& b) {
  if (a.index() != b.index()) return false;
  if (const auto* d = std::get_if<DenseCovariance>(&a)) return same(d->sigma, std::get<DenseCovariance>(b).sigma);
  const auto& ca = std::get<CorrelatedCovariance>(a);
  const auto& cb = std::get<CorrelatedCovariance>(b);
  return same(ca.stddev, cb.stddev) && same(ca.correlation, cb.correlation);
}

[[noreturn]] void invalid(const std::string& invariant) { throw Error(ErrorCode::ValidationError, invariant); }

void check_length(const Vector& v, int n, const char* field) {
  if (v.size() != n) {
    invalid(std::string(field) + " has length " + std::to_string(v.size()) + ", expected N = " + std::to_string(n));
  }
}

// ---- JSON reading -------------------------------------------------------

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ParseError, "field '" + path + "': " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) field_error(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) field_error(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double read_number(const json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  field_error(path, "expected a number (or \"inf\" / \"-inf\")");
}

int read_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) field_error(path, "expected an integer");
  return v.get<int>();
}

Vector read_vector(const json& v, const std::string& path) {
  if (!v.is_array()) field_error(path, "expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = read_number(v[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

Matrix read_matrix(const json& v, const std::string& path) {
  if (!v.is_array()) field_error(path, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Eigen::Index cols = 0;
  Matrix out;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    const Vector row = read_vector(v[static_cast<std::size_t>(r)], row_path);
    if (r == 0) {
      cols = row.size();
      out.resize(rows, cols);
    } else if (row.size() != cols) {
      field_error(row_path, "row length " + std::to_string(row.size()) + " differs from " + std::to_string(cols));
    }
    out.row(r) = row.transpose();
  }
  return out;
}

CovarianceSpec read_covariance(const json& v, const std::string& path) {
  if (!v.is_object()) field_error(path, "expected an object with 'dense' or 'stddev' + 'correlation'");
  if (v.contains("dense")) return DenseCovariance{read_matrix(v["dense"], join(path, "dense"))};
  if (v.contains("stddev") || v.contains("correlation")) {
    return CorrelatedCovariance{read_vector(require(v, "stddev", path), join(path, "stddev")),
                                read_matrix(require(v, "correlation", path), join(path, "correlation"))};
  }
  field_error(path, "expected 'dense' or 'stddev' + 'correlation'");
}

std::pair<int, int> line_and_column(std::string_view text, std::size_t byte) {
  int line = 1;
  int column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

// ---- JSON writing -------------------------------------------------------

json write_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json write_vector(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(write_number(v(i)));
  return out;
}

json write_matrix(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(write_vector(m.row(r).transpose()));
  return out;
}

// ---- 13-bus reduction ----------------------------------------------------

constexpr double kBaseKva = 5000.0;
constexpr double kBaseKv = 4.16;
constexpr double kFeetPerMile = 5280.0;

/// Positive-sequence series impedance of the overhead and underground line
/// configurations, ohm per mile.
std::complex<double> config_impedance(int config) {
  switch (config) {
    case 601: return {0.18597, 0.59677};
    case 602: return {0.59207, 0.76024};
    case 603:
    case 604: return {1.12000, 0.89290};
    case 605: return {1.32920, 1.34750};
    case 606: return {0.48740, 0.41513};
    case 607: return {1.34250, 0.51240};
    default: break;
  }
  throw Error(ErrorCode::ValidationError, "unknown line configuration " + std::to_string(config));
}

struct Segment {
  int from;
  int to;
  int config;  ///< 0 marks the in-line transformer
  double feet;
};

// Bus ids: 0 = 650 (head), 1 = 632, 2 = 633, 3 = 634, 4 = 645, 5 = 646,
// 6 = 671 merged with 692 through the closed switch, 7 = 680, 8 = 684,
// 9 = 611, 10 = 652, 11 = 675.
constexpr std::array<Segment, 11> kThirteenBusSegments{{
    {0, 1, 601, 2000.0},
    {1, 2, 602, 500.0},
    {2, 3, 0, 0.0},
    {1, 4, 603, 500.0},
    {4, 5, 603, 300.0},
    {1, 6, 601, 2000.0},
    {6, 7, 601, 1000.0},
    {6, 8, 604, 300.0},
    {8, 9, 605, 300.0},
    {8, 10, 607, 800.0},
    {6, 11, 606, 500.0},
}};

// Three-phase real load per bus, kW, buses 1..11. The 632-671 distributed load
// is split between its ends; 692 is folded into 671. Buses 633, 680 and 684
// carry no load in the reference data and get a token 10 kW so every
// injection is negative.
constexpr std::array<double, 11> kThirteenBusLoadKw{100.0, 10.0, 400.0, 170.0, 230.0, 1425.0,
                                                    10.0,  10.0, 170.0, 128.0, 843.0};

// 500 kVA substation-to-634 transformer: 1.1% + j2% on its own rating.
constexpr double kTransformerKva = 500.0;
constexpr std::complex<double> kTransformerPu{0.011, 0.02};

std::complex<double> segment_impedance_pu(const Segment& s) {
  if (s.config == 0) return kTransformerPu * (kBaseKva / kTransformerKva);
  const double base_ohm = kBaseKv * kBaseKv * 1000.0 / kBaseKva;
  return config_impedance(s.config) * (s.feet / kFeetPerMile) / base_ohm;
}

}  // namespace

bool operator==(const FeederSpec& a, const FeederSpec& b) {
  return a.name == b.name && a.buses == b.buses && a.lines == b.lines && same(a.q_lo, b.q_lo) &&
         same(a.q_hi, b.q_hi) && same(a.v_lo, b.v_lo) && same(a.v_hi, b.v_hi) && same(a.covariance, b.covariance) &&
         a.alpha == b.alpha && a.etas == b.etas;
}

GaussianUncertainty covariance_of(const FeederSpec& spec) {
  if (const auto* d = std::get_if<DenseCovariance>(&spec.covariance)) return GaussianUncertainty::validate(d->sigma);
  const auto& c = std::get<CorrelatedCovariance>(spec.covariance);
  if ((c.stddev.array() <= 0.0).any() || !c.stddev.allFinite()) invalid("covariance stddev must be positive");
  return from_correlation(c.stddev, c.correlation);
}

void validate(const FeederSpec& spec) {
  const RadialNetwork net = RadialNetwork::build(spec.buses, spec.lines);
  const int n = net.size();
  if (n < 1) invalid("feeder needs at least one non-reference bus");
  check_length(spec.q_lo, n, "q_lo");
  check_length(spec.q_hi, n, "q_hi");
  check_length(spec.v_lo, n, "v_lo");
  check_length(spec.v_hi, n, "v_hi");
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string at = " at bus " + std::to_string(i + 1);
    if (std::isnan(spec.q_lo(i)) || std::isnan(spec.q_hi(i)) || !(spec.q_lo(i) <= spec.q_hi(i))) {
      invalid("q_lo <= q_hi" + at);
    }
    if (!std::isfinite(spec.v_lo(i)) || !std::isfinite(spec.v_hi(i)) || !(spec.v_lo(i) < spec.v_hi(i))) {
      invalid("finite v_lo < v_hi" + at);
    }
  }
  for (const Bus& b : spec.buses) {
    if (!std::isfinite(b.p)) invalid("finite injection at bus " + std::to_string(b.id));
  }
  if (covariance_of(spec).dimension() != n) {
    throw Error(ErrorCode::DimensionMismatch, "covariance dimension differs from N = " + std::to_string(n));
  }
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) invalid("alpha in (0,1)");
  for (double e : spec.etas) {
    if (!(e > 0.0 && e < 1.0)) invalid("every eta in (0,1)");
  }
}

FeederInstance load(const FeederSpec& spec) {
  validate(spec);
  RadialNetwork net = RadialNetwork::build(spec.buses, spec.lines);
  DispatchProblem problem{sensitivity_matrices(net),
                          net.injections(),
                          spec.q_lo,
                          spec.q_hi,
                          {spec.v_lo, spec.v_hi},
                          covariance_of(spec),
                          spec.alpha,
                          spec.etas.empty() ? spec.alpha : spec.etas.front()};
  return FeederInstance{spec, std::move(net), std::move(problem)};
}

FeederSpec parse_feeder(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + e.what());
  }
  if (!doc.is_object()) field_error("", "document must be an object");

  FeederSpec spec;
  const json& name = require(doc, "name", "");
  if (!name.is_string()) field_error("name", "expected a string");
  spec.name = name.get<std::string>();

  const json& buses = require(doc, "buses", "");
  if (!buses.is_array()) field_error("buses", "expected an array");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const std::string path = "buses[" + std::to_string(i) + "]";
    spec.buses.push_back(Bus{read_int(require(buses[i], "id", path), join(path, "id")),
                             read_number(require(buses[i], "p", path), join(path, "p"))});
  }
  const json& lines = require(doc, "lines", "");
  if (!lines.is_array()) field_error("lines", "expected an array");
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string path = "lines[" + std::to_string(i) + "]";
    const json& l = lines[i];
    spec.lines.push_back(Line{read_int(require(l, "from", path), join(path, "from")),
                              read_int(require(l, "to", path), join(path, "to")),
                              read_number(require(l, "r", path), join(path, "r")),
                              read_number(require(l, "x", path), join(path, "x"))});
  }
  spec.q_lo = read_vector(require(doc, "q_lo", ""), "q_lo");
  spec.q_hi = read_vector(require(doc, "q_hi", ""), "q_hi");
  spec.v_lo = read_vector(require(doc, "v_lo", ""), "v_lo");
  spec.v_hi = read_vector(require(doc, "v_hi", ""), "v_hi");
  spec.covariance = read_covariance(require(doc, "covariance", ""), "covariance");
  spec.alpha = read_number(require(doc, "alpha", ""), "alpha");
  if (doc.contains("etas")) {
    const Vector etas = read_vector(doc["etas"], "etas");
    spec.etas.assign(etas.data(), etas.data() + etas.size());
  }
  validate(spec);
  return spec;
}

std::string serialize_feeder(const FeederSpec& spec) {
  json doc;
  doc["name"] = spec.name;
  doc["buses"] = json::array();
  for (const Bus& b : spec.buses) doc["buses"].push_back({{"id", b.id}, {"p", b.p}});
  doc["lines"] = json::array();
  for (const Line& l : spec.lines) doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
  doc["q_lo"] = write_vector(spec.q_lo);
  doc["q_hi"] = write_vector(spec.q_hi);
  doc["v_lo"] = write_vector(spec.v_lo);
  doc["v_hi"] = write_vector(spec.v_hi);
  if (const auto* d = std::get_if<DenseCovariance>(&spec.covariance)) {
    doc["covariance"] = {{"dense", write_matrix(d->sigma)}};
  } else {
    const auto& c = std::get<CorrelatedCovariance>(spec.covariance);
    doc["covariance"] = {{"stddev", write_vector(c.stddev)}, {"correlation", write_matrix(c.correlation)}};
  }
  doc["alpha"] = spec.alpha;
  doc["etas"] = spec.etas;
  return doc.dump(2) + "\n";
}

FeederSpec read_feeder_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return parse_feeder(buf.str());
}

FeederSpec builtin_four_bus() {
  FeederSpec spec;
  spec.name = "four-bus";
  spec.buses = {{0, 0.0}, {1, -0.1}, {2, -0.2}, {3, -0.3}};
  spec.lines = {{0, 1, 0.1, 0.2}, {1, 2, 0.2, 0.19}, {2, 3, 0.2, 0.31}};
  spec.q_lo = Vector{{-kInf, -0.2, -0.2}};
  spec.q_hi = Vector{{kInf, 0.2, 0.2}};
  spec.v_lo = Vector::Constant(3, -0.1);
  spec.v_hi = Vector::Constant(3, 0.1);
  spec.covariance = DenseCovariance{0.002 * Matrix{{1.0, 0.7, 0.0}, {0.7, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
  spec.alpha = 0.88;
  spec.etas = {std::cbrt(0.88), 0.88};
  return spec;
}

FeederSpec thirteen_bus(const ThirteenBusParams& params) {
  if (!(params.stddev > 0.0) || !(params.correlation_length > 0.0) || !(params.voltage_band > 0.0) ||
      !(params.stddev_jitter >= 0.0 && params.stddev_jitter < 1.0)) {
    invalid("thirteen_bus parameters must be positive with jitter in [0,1)");
  }
  constexpr int n = static_cast<int>(kThirteenBusLoadKw.size());
  FeederSpec spec;
  spec.name = "thirteen-bus";
  spec.buses.push_back({0, 0.0});
  for (int i = 0; i < n; ++i) spec.buses.push_back({i + 1, -kThirteenBusLoadKw[static_cast<std::size_t>(i)] / kBaseKva});

  // Impedance magnitude of the line feeding each bus, for electrical distances.
  std::vector<double> feed_abs(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> parent(static_cast<std::size_t>(n + 1), -1);
  for (const Segment& s : kThirteenBusSegments) {
    const std::complex<double> z = segment_impedance_pu(s);
    spec.lines.push_back({s.from, s.to, z.real(), z.imag()});
    feed_abs[static_cast<std::size_t>(s.to)] = std::abs(z);
    parent[static_cast<std::size_t>(s.to)] = s.from;
  }

  // Distance from the head and depth of each bus; segments list parents first.
  std::vector<double> head_dist(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> depth(static_cast<std::size_t>(n + 1), 0);
  for (const Segment& s : kThirteenBusSegments) {
    head_dist[static_cast<std::size_t>(s.to)] = head_dist[static_cast<std::size_t>(s.from)] + feed_abs[static_cast<std::size_t>(s.to)];
    depth[static_cast<std::size_t>(s.to)] = depth[static_cast<std::size_t>(s.from)] + 1;
  }
  auto common_ancestor = [&](int a, int b) {
    while (depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)]) a = parent[static_cast<std::size_t>(a)];
    while (depth[static_cast<std::size_t>(b)] > depth[static_cast<std::size_t>(a)]) b = parent[static_cast<std::size_t>(b)];
    while (a != b) {
      a = parent[static_cast<std::size_t>(a)];
      b = parent[static_cast<std::size_t>(b)];
    }
    return a;
  };

  Matrix correlation(n, n);
  for (int i = 1; i <= n; ++i) {
    for (int k = 1; k <= n; ++k) {
      const int c = common_ancestor(i, k);
      const double d = head_dist[static_cast<std::size_t>(i)] + head_dist[static_cast<std::size_t>(k)] -
                       2.0 * head_dist[static_cast<std::size_t>(c)];
      correlation(i - 1, k - 1) = i == k ? 1.0 : std::exp(-d / params.correlation_length);
    }
  }
  Vector stddev(n);
  for (int i = 0; i < n; ++i) {
    const double u = normal::counter_uniform(params.seed, static_cast<std::uint64_t>(i));
    stddev(i) = params.stddev * (1.0 + params.stddev_jitter * (2.0 * u - 1.0));
  }
  spec.covariance = CorrelatedCovariance{stddev, correlation};
  spec.q_lo = Vector::Constant(n, -0.1);
  spec.q_hi = Vector::Constant(n, 0.1);
  spec.v_lo = Vector::Constant(n, -params.voltage_band);
  spec.v_hi = Vector::Constant(n, params.voltage_band);
  spec.alpha = 0.92;
  spec.etas = {std::pow(0.92, 1.0 / n), 0.92, 0.98};
  return spec;
}

FeederSpec builtin_thirteen_bus() { return thirteen_bus(ThirteenBusParams{}); }

std::optional<FeederSpec> builtin_feeder(std::string_view name) {
  if (name == "four-bus") return builtin_four_bus();
  if (name == "thirteen-bus") return builtin_thirteen_bus();
  return std::nullopt;
}

}  // namespace ccvolt

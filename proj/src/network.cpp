#include "ccvolt/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <utility>

#include "ccvolt/error.hpp"

namespace ccvolt {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::string line_name(const Line& l) {
  return "(" + std::to_string(l.from) + "," + std::to_string(l.to) + ")";
}

}  // namespace

RadialNetwork RadialNetwork::build(std::vector<Bus> buses, std::vector<Line> lines) {
  if (buses.empty()) throw Error(ErrorCode::BadBusId, "bus list is empty");
  std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id != static_cast<int>(i)) {
      throw Error(ErrorCode::BadBusId, "bus ids must be unique and contiguous from 0; got id " +
                                           std::to_string(buses[i].id) + " at position " + std::to_string(i));
    }
  }
  const int n_bus = static_cast<int>(buses.size());

  std::set<std::pair<int, int>> seen;
  for (const Line& l : lines) {
    if (l.from < 0 || l.from >= n_bus || l.to < 0 || l.to >= n_bus) {
      throw Error(ErrorCode::BadBusId, "line " + line_name(l) + " references an unknown bus");
    }
    if (!(l.r >= 0.0) || !(l.x >= 0.0) || (l.r == 0.0 && l.x == 0.0) || !std::isfinite(l.r) ||
        !std::isfinite(l.x)) {
      throw Error(ErrorCode::BadImpedance, "line " + line_name(l) + " needs r >= 0, x >= 0, not both zero");
    }
    if (l.from == l.to) throw Error(ErrorCode::CycleDetected, "self-loop " + line_name(l));
    if (!seen.emplace(std::min(l.from, l.to), std::max(l.from, l.to)).second) {
      throw Error(ErrorCode::DuplicateLine, "line " + line_name(l) + " appears more than once");
    }
  }

  DisjointSets sets(buses.size());
  for (const Line& l : lines) {
    if (!sets.unite(static_cast<std::size_t>(l.from), static_cast<std::size_t>(l.to))) {
      throw Error(ErrorCode::CycleDetected, "line " + line_name(l) + " closes a cycle");
    }
  }
  for (int b = 1; b < n_bus; ++b) {
    if (sets.find(static_cast<std::size_t>(b)) != sets.find(0)) {
      throw Error(ErrorCode::DisconnectedBus, "bus " + std::to_string(b) + " is not reachable from bus 0");
    }
  }

  // Orient from the root.
  std::vector<std::vector<std::size_t>> incident(buses.size());
  for (std::size_t li = 0; li < lines.size(); ++li) {
    incident[static_cast<std::size_t>(lines[li].from)].push_back(li);
    incident[static_cast<std::size_t>(lines[li].to)].push_back(li);
  }

  RadialNetwork net;
  net.parent_.assign(buses.size(), -1);
  net.depth_.assign(buses.size(), 0);
  net.lines_.resize(buses.size() - 1);
  std::vector<bool> visited(buses.size(), false);
  std::queue<int> frontier;
  frontier.push(0);
  visited[0] = true;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (std::size_t li : incident[static_cast<std::size_t>(u)]) {
      const Line& l = lines[li];
      const int v = l.from == u ? l.to : l.from;
      if (visited[static_cast<std::size_t>(v)]) continue;
      visited[static_cast<std::size_t>(v)] = true;
      net.parent_[static_cast<std::size_t>(v)] = u;
      net.depth_[static_cast<std::size_t>(v)] = net.depth_[static_cast<std::size_t>(u)] + 1;
      net.lines_[static_cast<std::size_t>(v - 1)] = Line{u, v, l.r, l.x};
      frontier.push(v);
    }
  }
  buses[0].p = 0.0;
  net.buses_ = std::move(buses);
  return net;
}

int RadialNetwork::parent(int bus) const {
  if (bus < 0 || bus > size()) throw Error(ErrorCode::BadBusId, "bus " + std::to_string(bus));
  return parent_[static_cast<std::size_t>(bus)];
}

const Line& RadialNetwork::line_to(int bus) const {
  if (bus < 1 || bus > size()) throw Error(ErrorCode::BadBusId, "bus " + std::to_string(bus));
  return lines_[static_cast<std::size_t>(bus - 1)];
}

int RadialNetwork::depth(int bus) const {
  if (bus < 0 || bus > size()) throw Error(ErrorCode::BadBusId, "bus " + std::to_string(bus));
  return depth_[static_cast<std::size_t>(bus)];
}

Vector RadialNetwork::injections() const {
  Vector p(size());
  for (int i = 1; i <= size(); ++i) p(i - 1) = buses_[static_cast<std::size_t>(i)].p;
  return p;
}

std::vector<Line> path_to_root(const RadialNetwork& net, int bus) {
  if (bus < 1 || bus > net.size()) {
    throw Error(ErrorCode::BadBusId, "path_to_root needs a bus in 1.." + std::to_string(net.size()) +
                                         ", got " + std::to_string(bus));
  }
  std::vector<Line> path;
  for (int b = bus; b != 0; b = net.parent(b)) path.push_back(net.line_to(b));
  std::reverse(path.begin(), path.end());
  return path;
}

SensitivityMatrices sensitivity_matrices(const RadialNetwork& net) {
  const int n = net.size();
  SensitivityMatrices s{Matrix::Zero(n, n), Matrix::Zero(n, n)};

  // Lines are identified by their child bus; walk both buses to the root and
  // sum the impedance of the lines they share.
  std::vector<char> on_path(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    std::fill(on_path.begin(), on_path.end(), 0);
    for (int b = i; b != 0; b = net.parent(b)) on_path[static_cast<std::size_t>(b)] = 1;
    for (int k = i; k <= n; ++k) {
      double r = 0.0;
      double x = 0.0;
      for (int b = k; b != 0; b = net.parent(b)) {
        if (on_path[static_cast<std::size_t>(b)]) {
          r += net.line_to(b).r;
          x += net.line_to(b).x;
        }
      }
      s.R(i - 1, k - 1) = s.R(k - 1, i - 1) = r;
      s.X(i - 1, k - 1) = s.X(k - 1, i - 1) = x;
    }
  }
  return s;
}

Vector voltage_profile(const SensitivityMatrices& sens, const Vector& p, const Vector& q) {
  const Eigen::Index n = sens.size();
  if (p.size() != n || q.size() != n || sens.X.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "voltage_profile expects vectors of length " + std::to_string(n));
  }
  return sens.R * p + sens.X * q;
}

}  // namespace ccvolt

#include <array>
#include <cmath>
#include <stdexcept>

#include "kernels/sov.hpp"

namespace ccvolt::kernels {

namespace {

constexpr std::array<int, 100> kPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,  59,  61,  67,  71,
    73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
    179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281,
    283, 293, 307, 311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409,
    419, 421, 431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541};

const std::array<double, kPrimes.size()>& generator_table() {
  static const auto table = [] {
    std::array<double, kPrimes.size()> t{};
    for (std::size_t i = 0; i < kPrimes.size(); ++i) {
      const double r = std::sqrt(static_cast<double>(kPrimes[i]));
      t[i] = r - std::floor(r);
    }
    return t;
  }();
  return table;
}

}  // namespace

std::span<const double> richtmyer_generators(int dims) {
  if (dims < 0 || static_cast<std::size_t>(dims) > kPrimes.size()) {
    throw std::out_of_range("lattice rule supports at most 100 dimensions");
  }
  return {generator_table().data(), static_cast<std::size_t>(dims)};
}

void qmc_sums_serial(const SovProblem& p, std::span<const double> shifts, int replicates, std::int64_t k_begin,
                     std::int64_t k_end, std::span<double> sums) {
  const int m = p.n - 1;
  const auto gen = richtmyer_generators(m);
  std::vector<double> w(static_cast<std::size_t>(m)), wr(static_cast<std::size_t>(m)),
      y(static_cast<std::size_t>(p.n));
  for (int r = 0; r < replicates; ++r) {
    sums[static_cast<std::size_t>(r)] +=
        qmc_replicate_chunk(p, gen, shifts.data() + static_cast<std::ptrdiff_t>(r) * m, k_begin, k_end, w, wr, y);
  }
}

}  // namespace ccvolt::kernels

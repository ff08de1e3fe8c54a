#include <omp.h>

#include "kernels/sov.hpp"

namespace ccvolt::kernels {

void qmc_sums_omp(const SovProblem& p, std::span<const double> shifts, int replicates, std::int64_t k_begin,
                  std::int64_t k_end, std::span<double> sums) {
  const int m = p.n - 1;
  const auto gen = richtmyer_generators(m);
#pragma omp parallel
  {
    std::vector<double> w(static_cast<std::size_t>(m)), wr(static_cast<std::size_t>(m)),
        y(static_cast<std::size_t>(p.n));
#pragma omp for schedule(static)
    for (int r = 0; r < replicates; ++r) {
      sums[static_cast<std::size_t>(r)] +=
          qmc_replicate_chunk(p, gen, shifts.data() + static_cast<std::ptrdiff_t>(r) * m, k_begin, k_end, w, wr, y);
    }
  }
}

}  // namespace ccvolt::kernels

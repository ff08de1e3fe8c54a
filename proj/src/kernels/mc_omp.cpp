#include <omp.h>

#include "kernels/sov.hpp"

namespace ccvolt::kernels {

std::int64_t mc_count_omp(const Matrix& chol, const Vector& lo, const Vector& hi, std::int64_t n,
                          std::uint64_t seed) {
  const auto dim = static_cast<std::uint64_t>(chol.rows());
  std::int64_t count = 0;
#pragma omp parallel reduction(+ : count)
  {
    std::vector<double> w(dim);
#pragma omp for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
      if (mc_draw_inside(chol, lo, hi, seed, static_cast<std::uint64_t>(j) * dim, w)) ++count;
    }
  }
  return count;
}

}  // namespace ccvolt::kernels

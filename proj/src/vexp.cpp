// Built with -ffast-math so the loops below use the vector exp from libmvec.
// Nothing else in the library is compiled this way.

#include "vexp.hpp"

#include <cmath>

namespace ncelm::kernels::detail {

double sum_exp_shifted(const double* x, std::size_t n, double shift) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t j = 0; j < n; ++j) s += std::exp(x[j] - shift);
  return s;
}

void exp_scaled(const double* x, double* out, std::size_t n, double scale) {
#pragma omp simd
  for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(x[j]) * scale;
}

}  // namespace ncelm::kernels::detail

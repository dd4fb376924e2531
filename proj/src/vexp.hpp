#ifndef NCELM_SRC_VEXP_HPP
#define NCELM_SRC_VEXP_HPP

#include <cstddef>

namespace ncelm::kernels::detail {

// sum_j exp(x[j] - shift)
double sum_exp_shifted(const double* x, std::size_t n, double shift);
// out[j] = exp(x[j]) * scale; out may alias x
void exp_scaled(const double* x, double* out, std::size_t n, double scale);

}  // namespace ncelm::kernels::detail

#endif  // NCELM_SRC_VEXP_HPP

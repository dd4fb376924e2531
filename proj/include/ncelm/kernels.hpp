#ifndef NCELM_KERNELS_HPP
#define NCELM_KERNELS_HPP

// Hot loops of training and evaluation. Every kernel has two builds:
// ncelm::kernels::* splits output rows across OpenMP threads and
// ncelm::kernels::serial::* is the single-threaded reference used by the
// tests and the benchmark. Each output row is produced by the same serial
// loop in both, so results do not depend on the thread count.

#include <cstddef>
#include <span>

#include "ncelm/tensor.hpp"

namespace ncelm::kernels {

// c (+)= a * b          a: m x k, b: k x n, c: m x n
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);
// c (+)= a * b^T        a: m x k, b: n x k, c: m x n
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);
// c (+)= a^T * b        a: r x m, b: r x n, c: m x n
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);

// Row-wise log-softmax in place; returns per-row log partition values.
void log_softmax_rows(Matrix& logits, std::span<double> log_partition);

// out[j] = exp(x[j]) * scale (vectorised exp); out may alias x.
void exp_scaled(std::span<const double> x, std::span<double> out, double scale);

// Adds the row vector `bias` to every row of m.
void add_row_bias(Matrix& m, std::span<const double> bias);

// out[j] += sum over rows of m(r, j)
void sum_rows(const Matrix& m, std::span<double> out);

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);
void log_softmax_rows(Matrix& logits, std::span<double> log_partition);

}  // namespace serial

// Threads used by the parallel kernels (OpenMP max threads, or 1 without OpenMP).
int thread_count();

}  // namespace ncelm::kernels

#endif  // NCELM_KERNELS_HPP

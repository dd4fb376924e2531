#include "ncelm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "vexp.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ncelm::kernels {
namespace {

void check_shapes(bool ok, const char* op, const Matrix& a, const Matrix& b, const Matrix& c) {
  if (!ok) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch a=" + a.shape_string() +
                                " b=" + b.shape_string() + " c=" + c.shape_string());
  }
}

// Row kernels shared by the serial and parallel builds. Rows are produced in
// blocks of kBlock; every output element is summed over k in ascending order
// whatever the blocking, so the serial and threaded results are bitwise equal.

constexpr std::size_t kBlock = 4;

using v4d = double __attribute__((vector_size(32)));
constexpr std::size_t kLanes = 4;
constexpr std::size_t kVecs = 3;  // 12 columns per register tile
constexpr std::size_t kWidth = kLanes * kVecs;

inline v4d load4(const double* p) {
  v4d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof v); }

// c[r0 .. r0+R) (+)= a[r0 .. r0+R) * b, a row-major with leading dim k_dim.
template <std::size_t R>
void nn_rows(const double* __restrict a, std::size_t k_dim, const double* __restrict b,
             std::size_t n, double* __restrict c, bool acc) {
  std::size_t j0 = 0;
  for (; j0 + kWidth <= n; j0 += kWidth) {
    v4d s[R][kVecs];
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t v = 0; v < kVecs; ++v)
        s[r][v] = acc ? load4(c + r * n + j0 + v * kLanes) : v4d{0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double* bk = b + k * n + j0;
      v4d bv[kVecs];
      for (std::size_t v = 0; v < kVecs; ++v) bv[v] = load4(bk + v * kLanes);
      for (std::size_t r = 0; r < R; ++r) {
        const double ark = a[r * k_dim + k];
        for (std::size_t v = 0; v < kVecs; ++v) s[r][v] += ark * bv[v];
      }
    }
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t v = 0; v < kVecs; ++v) store4(c + r * n + j0 + v * kLanes, s[r][v]);
  }
  if (j0 == n) return;
  for (std::size_t r = 0; r < R; ++r) {
    double* __restrict cr = c + r * n;
    if (!acc) std::fill(cr + j0, cr + n, 0.0);
    const double* ar = a + r * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double ark = ar[k];
      const double* __restrict bk = b + k * n;
      for (std::size_t j = j0; j < n; ++j) cr[j] += ark * bk[j];
    }
  }
}

inline double hsum(v4d v) { return (v[0] + v[1]) + (v[2] + v[3]); }

// c[r0 .. r0+R) (+)= a[r0 .. r0+R) * b^T with b: n x k_dim row-major; dot-product
// form over contiguous rows of both operands, 4 columns of c per tile.
template <std::size_t R>
void nt_rows(const double* __restrict a, std::size_t k_dim, const double* __restrict b,
             std::size_t n, double* __restrict c, bool acc) {
  const std::size_t k_vec = k_dim - k_dim % kLanes;
  std::size_t j0 = 0;
  for (; j0 + 4 <= n; j0 += 4) {
    v4d s[R][4] = {};
    for (std::size_t k = 0; k < k_vec; k += kLanes) {
      v4d bv[4];
      for (std::size_t q = 0; q < 4; ++q) bv[q] = load4(b + (j0 + q) * k_dim + k);
      for (std::size_t r = 0; r < R; ++r) {
        const v4d av = load4(a + r * k_dim + k);
        for (std::size_t q = 0; q < 4; ++q) s[r][q] += av * bv[q];
      }
    }
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t q = 0; q < 4; ++q) {
        double t = hsum(s[r][q]);
        for (std::size_t k = k_vec; k < k_dim; ++k) t += a[r * k_dim + k] * b[(j0 + q) * k_dim + k];
        double& out = c[r * n + j0 + q];
        out = acc ? out + t : t;
      }
  }
  for (; j0 < n; ++j0)
    for (std::size_t r = 0; r < R; ++r) {
      v4d sv = {};
      for (std::size_t k = 0; k < k_vec; k += kLanes)
        sv += load4(a + r * k_dim + k) * load4(b + j0 * k_dim + k);
      double t = hsum(sv);
      for (std::size_t k = k_vec; k < k_dim; ++k) t += a[r * k_dim + k] * b[j0 * k_dim + k];
      double& out = c[r * n + j0];
      out = acc ? out + t : t;
    }
}

inline void nt_block(const Matrix& a, const Matrix& b, Matrix& c, std::size_t blk, bool acc) {
  const std::size_t i0 = blk * kBlock;
  const std::size_t rows = std::min(kBlock, a.rows() - i0);
  const std::size_t k_dim = a.cols();
  const std::size_t n = b.rows();
  const double* ap = a.data() + i0 * k_dim;
  double* cp = c.data() + i0 * n;
  if (rows == kBlock) {
    nt_rows<kBlock>(ap, k_dim, b.data(), n, cp, acc);
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      nt_rows<1>(ap + r * k_dim, k_dim, b.data(), n, cp + r * n, acc);
  }
}

// Output rows [kBlock * blk, ...) of c = a * b.
inline void nn_block(const Matrix& a, const Matrix& b, Matrix& c, std::size_t blk, bool acc) {
  const std::size_t i0 = blk * kBlock;
  const std::size_t rows = std::min(kBlock, a.rows() - i0);
  const std::size_t k_dim = a.cols();
  const std::size_t n = b.cols();
  const double* ap = a.data() + i0 * k_dim;
  double* cp = c.data() + i0 * n;
  if (rows == kBlock) {
    nn_rows<kBlock>(ap, k_dim, b.data(), n, cp, acc);
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      nn_rows<1>(ap + r * k_dim, k_dim, b.data(), n, cp + r * n, acc);
  }
}

inline std::size_t num_blocks(std::size_t rows) { return (rows + kBlock - 1) / kBlock; }

inline double log_softmax_row(double* row, std::size_t n) {
  double mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  const double lz = mx + std::log(detail::sum_exp_shifted(row, n, mx));
  for (std::size_t j = 0; j < n; ++j) row[j] -= lz;
  return lz;
}

bool nn_ok(const Matrix& a, const Matrix& b, const Matrix& c) {
  return a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols();
}
bool nt_ok(const Matrix& a, const Matrix& b, const Matrix& c) {
  return a.cols() == b.cols() && c.rows() == a.rows() && c.cols() == b.rows();
}
bool tn_ok(const Matrix& a, const Matrix& b, const Matrix& c) {
  return a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols();
}

}  // namespace

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes(nn_ok(a, b, c), "gemm_nn", a, b, c);
  const auto m = static_cast<std::int64_t>(num_blocks(a.rows()));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) nn_block(a, b, c, static_cast<std::size_t>(i), accumulate);
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes(nt_ok(a, b, c), "gemm_nt", a, b, c);
  const auto m = static_cast<std::int64_t>(num_blocks(a.rows()));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) nt_block(a, b, c, static_cast<std::size_t>(i), accumulate);
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes(tn_ok(a, b, c), "gemm_tn", a, b, c);
  const Matrix at = transpose(a);
  const auto m = static_cast<std::int64_t>(num_blocks(at.rows()));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) nn_block(at, b, c, static_cast<std::size_t>(i), accumulate);
}

void log_softmax_rows(Matrix& logits, std::span<double> log_partition) {
  if (log_partition.size() != logits.rows() || logits.cols() == 0)
    throw std::invalid_argument("log_softmax_rows: bad shapes " + logits.shape_string());
  const auto m = static_cast<std::int64_t>(logits.rows());
  const std::size_t n = logits.cols();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    const auto r = static_cast<std::size_t>(i);
    log_partition[r] = log_softmax_row(logits.data() + r * n, n);
  }
}

void exp_scaled(std::span<const double> x, std::span<double> out, double scale) {
  if (x.size() != out.size()) throw std::invalid_argument("exp_scaled: length mismatch");
  detail::exp_scaled(x.data(), out.data(), x.size(), scale);
}

void add_row_bias(Matrix& m, std::span<const double> bias) {
  if (bias.size() != m.cols()) throw std::invalid_argument("add_row_bias: length mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* row = m.data() + r * m.cols();
    for (std::size_t j = 0; j < bias.size(); ++j) row[j] += bias[j];
  }
}

void sum_rows(const Matrix& m, std::span<double> out) {
  if (out.size() != m.cols()) throw std::invalid_argument("sum_rows: length mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.data() + r * m.cols();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
  }
}

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes(nn_ok(a, b, c), "gemm_nn", a, b, c);
  for (std::size_t i = 0; i < num_blocks(a.rows()); ++i) nn_block(a, b, c, i, accumulate);
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes(nt_ok(a, b, c), "gemm_nt", a, b, c);
  for (std::size_t i = 0; i < num_blocks(a.rows()); ++i) nt_block(a, b, c, i, accumulate);
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes(tn_ok(a, b, c), "gemm_tn", a, b, c);
  const Matrix at = transpose(a);
  for (std::size_t i = 0; i < num_blocks(at.rows()); ++i) nn_block(at, b, c, i, accumulate);
}

void log_softmax_rows(Matrix& logits, std::span<double> log_partition) {
  if (log_partition.size() != logits.rows() || logits.cols() == 0)
    throw std::invalid_argument("log_softmax_rows: bad shapes " + logits.shape_string());
  for (std::size_t r = 0; r < logits.rows(); ++r)
    log_partition[r] = log_softmax_row(logits.data() + r * logits.cols(), logits.cols());
}

}  // namespace serial
}  // namespace ncelm::kernels

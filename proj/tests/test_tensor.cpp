#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ncelm/kernels.hpp"
#include "ncelm/rng.hpp"
#include "ncelm/tensor.hpp"

using namespace ncelm;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix m(r, c);
  for (double& x : m.values()) x = rng.uniform(-1.0, 1.0);
  return m;
}

// Plain triple loop, independent of the kernels.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

// Entries are O(1) sums, so cancellation is judged against a unit floor.
void require_close(const Matrix& a, const Matrix& b, double rel) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.values()[i], y = b.values()[i];
    CHECK(std::abs(x - y) <= rel * std::max({std::abs(x), std::abs(y), 1.0}));
  }
}

}  // namespace

TEST_CASE("matmul hand cases") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{1}, {1}};
  CHECK(matmul(a, b) == Matrix{{3}, {7}});
  const Matrix r = random_matrix(4, 6, 3);
  CHECK(matmul(r, Matrix::identity(6)) == r);
}

TEST_CASE("matmul matches the naive triple loop") {
  const Matrix a = random_matrix(7, 5, 1), b = random_matrix(5, 3, 2);
  require_close(matmul(a, b), naive_matmul(a, b), 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes and names them") {
  const Matrix a(2, 3), b(4, 2);
  try {
    matmul(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2 x 3") != std::string::npos);
    CHECK(msg.find("4 x 2") != std::string::npos);
  }
}

TEST_CASE("gemm variants agree with the oracle on awkward shapes") {
  // sizes straddle the 4-row block and the vector tile widths
  for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{
           {1, 1, 1}, {3, 5, 7}, {4, 4, 12}, {9, 13, 25}, {17, 64, 30}, {20, 3, 256}}) {
    const Matrix a = random_matrix(m, k, m * 100 + k);
    const Matrix b = random_matrix(k, n, n * 7 + 1);
    const Matrix expect = naive_matmul(a, b);

    Matrix c(m, n);
    kernels::gemm_nn(a, b, c, false);
    require_close(c, expect, 1e-12);
    kernels::serial::gemm_nn(a, b, c, false);
    require_close(c, expect, 1e-12);

    const Matrix bt = transpose(b);
    kernels::gemm_nt(a, bt, c, false);
    require_close(c, expect, 1e-12);
    kernels::serial::gemm_nt(a, bt, c, false);
    require_close(c, expect, 1e-12);

    const Matrix at = transpose(a);
    kernels::gemm_tn(at, b, c, false);
    require_close(c, expect, 1e-12);
    kernels::serial::gemm_tn(at, b, c, false);
    require_close(c, expect, 1e-12);

    // accumulate adds onto what is there
    Matrix acc(m, n, 1.0);
    kernels::gemm_nn(a, b, acc, true);
    Matrix expect_acc = expect;
    for (double& x : expect_acc.values()) x += 1.0;
    require_close(acc, expect_acc, 1e-12);
  }
}

TEST_CASE("parallel and serial kernels are bitwise equal") {
  const Matrix a = random_matrix(37, 64, 11), b = random_matrix(301, 64, 12);
  Matrix c1(37, 301), c2(37, 301);
  kernels::gemm_nt(a, b, c1, false);
  kernels::serial::gemm_nt(a, b, c2, false);
  CHECK(c1 == c2);

  Matrix l1 = c1, l2 = c1;
  std::vector<double> z1(37), z2(37);
  kernels::log_softmax_rows(l1, z1);
  kernels::serial::log_softmax_rows(l2, z2);
  CHECK(l1 == l2);
  CHECK(z1 == z2);
}

TEST_CASE("log_softmax_rows normalises each row") {
  Matrix x = random_matrix(5, 1000, 4);
  for (double& v : x.values()) v *= 30.0;
  const Matrix orig = x;
  std::vector<double> lz(5);
  kernels::log_softmax_rows(x, lz);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(log_sum_exp(x.row(r)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lz[r] == doctest::Approx(log_sum_exp(orig.row(r))).epsilon(1e-13));
  }
}

TEST_CASE("exp_scaled") {
  const std::vector<double> x{-700.0, -1.0, 0.0, 0.5, 3.0};
  std::vector<double> out(x.size());
  kernels::exp_scaled(x, out, 0.5);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(out[i] == doctest::Approx(0.5 * std::exp(x[i])).epsilon(1e-14));
}

TEST_CASE("log_sum_exp") {
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(log_sum_exp(zeros) == doctest::Approx(0.693147180559945).epsilon(1e-14));
  const std::vector<double> one{-3.25};
  CHECK(log_sum_exp(one) == -3.25);
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), std::invalid_argument);
  CHECK(log_add_exp(1000.0, 1000.0) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_add_exp(-std::numeric_limits<double>::infinity(), 2.0) == 2.0);
}

TEST_CASE("small helpers") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
  CHECK(squared_norm(a) == 14.0);
  CHECK(all_finite(a));
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_FALSE(all_finite(bad));
  const Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(transpose(m) == Matrix{{1, 4}, {2, 5}, {3, 6}});
}

TEST_CASE("rng streams are deterministic and role-separated") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream init = RngStream::for_role(42, StreamRole::kInit);
  RngStream drop = RngStream::for_role(42, StreamRole::kDropout);
  CHECK(init.next_u64() != drop.next_u64());

  RngStream u(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform(-0.1, 0.1);
    CHECK(x >= -0.1);
    CHECK(x < 0.1);
    CHECK(u.below(3) < 3);
  }
  CHECK_THROWS_AS(u.uniform(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("rng state round-trips through text") {
  RngStream a(9);
  a.gaussian();  // leaves a cached spare
  RngStream b(1);
  b.restore(a.state());
  CHECK(a == b);
  for (int i = 0; i < 10; ++i) CHECK(a.gaussian() == b.gaussian());
}

TEST_CASE("splitmix64 reference values") {
  // first outputs of the reference generator seeded with 0 and 1
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(1) == 0x910a2dec89025cc1ULL);
}

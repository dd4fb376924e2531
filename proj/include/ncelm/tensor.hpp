#ifndef NCELM_TENSOR_HPP
#define NCELM_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ncelm {

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1 matrices
// when they need to travel as a Matrix; most code uses std::vector<double>.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v);
  void resize(std::size_t rows, std::size_t cols, double fill = 0.0);

  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Standard product a * b. Throws std::invalid_argument on a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// max(v) + ln sum exp(v - max(v)). Throws on empty input.
double log_sum_exp(std::span<const double> v);

// ln(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

double dot(std::span<const double> a, std::span<const double> b);

// Squared L2 norm of all entries.
double squared_norm(std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace ncelm

#endif  // NCELM_TENSOR_HPP

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace eli::numeric {

/// Dense row-major matrix of doubles.
///
/// Invariant: data().size() == rows() * cols(). A matrix with zero rows (a
/// "B x 0" or "0 x D" batch) is valid and is what empty batches look like.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  // "3x4" for error messages.
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a[m x k] * b[k x n]
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b for a[k x m], b[k x n]
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// a * b^T for a[m x k], b[n x k]
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

bool all_finite(std::span<const double> values);
inline bool all_finite(const Matrix& m) { return all_finite(m.data()); }

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);
Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end);
Matrix concat_rows(const Matrix& top, const Matrix& bottom);

// Column means over rows; empty when m has no rows.
std::vector<double> column_means(const Matrix& m);
double mean(std::span<const double> values);

}  // namespace eli::numeric

#include "eli/numeric/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "eli/numeric/errors.hpp"

namespace eli::numeric {

namespace {

// Lanes per vector: a full zmm register when AVX-512 is enabled, else four
// doubles, lowered to whatever the target offers.
#ifdef __AVX512F__
constexpr std::size_t kLanes = 8;
#else
constexpr std::size_t kLanes = 4;
#endif
typedef double Vec __attribute__((vector_size(kLanes * sizeof(double))));

constexpr std::size_t kRowTile = 4;
constexpr std::size_t kVecPerTile = 2;
constexpr std::size_t kColTile = kLanes * kVecPerTile;

inline Vec load(const double* p) {
  Vec v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, Vec v) { std::memcpy(p, &v, sizeof v); }

inline Vec splat(double x) { return Vec{} + x; }

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                     shape_string());
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged initializer for matrix");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  Matrix c(m, n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();

  // Register-blocked kernel: a kRowTile x kColTile block of c accumulates in
  // vector registers over the whole k range. Every c(i, j) is still summed in
  // k order, so results match the naive triple loop bit for bit.
  const std::size_t n_full = n - n % kColTile;
  const std::size_t m_full = m - m % kRowTile;
  for (std::size_t j0 = 0; j0 < n_full; j0 += kColTile) {
    for (std::size_t i0 = 0; i0 < m_full; i0 += kRowTile) {
      Vec acc[kRowTile][kVecPerTile] = {};
      const double* a0 = pa + i0 * k;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double* brow = pb + kk * n + j0;
        Vec bv[kVecPerTile];
        for (std::size_t v = 0; v < kVecPerTile; ++v) bv[v] = load(brow + kLanes * v);
        for (std::size_t r = 0; r < kRowTile; ++r) {
          const Vec av = splat(a0[r * k + kk]);
          for (std::size_t v = 0; v < kVecPerTile; ++v) acc[r][v] += av * bv[v];
        }
      }
      for (std::size_t r = 0; r < kRowTile; ++r) {
        for (std::size_t v = 0; v < kVecPerTile; ++v) store(pc + (i0 + r) * n + j0 + kLanes * v, acc[r][v]);
      }
    }
    for (std::size_t i = m_full; i < m; ++i) {
      Vec acc[kVecPerTile] = {};
      for (std::size_t kk = 0; kk < k; ++kk) {
        const Vec av = splat(pa[i * k + kk]);
        const double* brow = pb + kk * n + j0;
        for (std::size_t v = 0; v < kVecPerTile; ++v) acc[v] += av * load(brow + kLanes * v);
      }
      for (std::size_t v = 0; v < kVecPerTile; ++v) store(pc + i * n + j0 + kLanes * v, acc[v]);
    }
  }
  // Leftover columns, eight rows at a time so the k-ordered sums run as
  // independent chains.
  if (n_full < n) {
    constexpr std::size_t kChains = 8;
    const std::size_t m_chained = m - m % kChains;
    for (std::size_t j = n_full; j < n; ++j) {
      for (std::size_t i0 = 0; i0 < m_chained; i0 += kChains) {
        double acc[kChains] = {};
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double bv = pb[kk * n + j];
          for (std::size_t r = 0; r < kChains; ++r) acc[r] += pa[(i0 + r) * k + kk] * bv;
        }
        for (std::size_t r = 0; r < kChains; ++r) pc[(i0 + r) * n + j] = acc[r];
      }
      for (std::size_t i = m_chained; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) acc += pa[i * k + kk] * pb[kk * n + j];
        pc[i * n + j] = acc;
      }
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_at_b: " + a.shape_string() + "^T * " + b.shape_string());
  }
  return matmul(transpose(a), b);
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_a_bt: " + a.shape_string() + " * " + b.shape_string() + "^T");
  }
  return matmul(a, transpose(b));
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                       m.shape_string());
    }
    std::copy_n(m.row(rows[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
  if (begin > end || end > m.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + m.shape_string());
  }
  const auto first = m.values().begin() + static_cast<std::ptrdiff_t>(begin * m.cols());
  const auto last = m.values().begin() + static_cast<std::ptrdiff_t>(end * m.cols());
  return Matrix(end - begin, m.cols(), std::vector<double>(first, last));
}

Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  if (top.cols() != bottom.cols()) {
    throw ShapeError("concat_rows: " + top.shape_string() + " over " + bottom.shape_string());
  }
  std::vector<double> data(top.values());
  data.insert(data.end(), bottom.values().begin(), bottom.values().end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

std::vector<double> column_means(const Matrix& m) {
  if (m.rows() == 0) return {};
  std::vector<double> means(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) means[c] += row[c];
  }
  for (double& v : means) v /= static_cast<double>(m.rows());
  return means;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace eli::numeric

#include "eli/dataio/pca.hpp"

#include <cmath>

#include "eli/numeric/errors.hpp"

namespace eli::dataio {

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> multiply(const Matrix& a, const std::vector<double>& v) {
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * v[c];
    out[r] = s;
  }
  return out;
}

}  // namespace

PcaBasis fit_pca(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n == 0 || d == 0) throw ArgumentError("fit_pca: empty input " + x.shape_string());
  if (k > d) throw ShapeError("fit_pca: cannot take " + std::to_string(k) + " components of dim " +
                              std::to_string(d));

  PcaBasis basis{numeric::column_means(x), Matrix(k, d)};
  Matrix centered = x;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = centered.row(r);
    for (std::size_t c = 0; c < d; ++c) row[c] -= basis.mean[c];
  }
  Matrix cov = numeric::matmul_at_b(centered, centered);
  for (double& v : cov.data()) v /= static_cast<double>(n);

  for (std::size_t comp = 0; comp < k; ++comp) {
    // Deterministic, non-degenerate start.
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
    double nv = norm(v);
    for (double& e : v) e /= nv;
    for (int iter = 0; iter < 1000; ++iter) {
      std::vector<double> w = multiply(cov, v);
      const double nw = norm(w);
      if (nw == 0.0) break;  // remaining variance is zero
      double change = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        w[i] /= nw;
        change = std::max(change, std::abs(w[i] - v[i]));
      }
      v = std::move(w);
      if (change < 1e-12) break;
    }
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
      for (double& e : v) e = -e;
    }
    for (std::size_t i = 0; i < d; ++i) basis.components(comp, i) = v[i];

    // Deflate: cov <- cov - lambda v v^T.
    const std::vector<double> cv = multiply(cov, v);
    double lambda = 0.0;
    for (std::size_t i = 0; i < d; ++i) lambda += v[i] * cv[i];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov(i, j) -= lambda * v[i] * v[j];
    }
  }
  return basis;
}

Matrix project(const PcaBasis& basis, const Matrix& x) {
  if (x.cols() != basis.mean.size()) {
    throw ShapeError("project: input " + x.shape_string() + " does not match basis dim " +
                     std::to_string(basis.mean.size()));
  }
  Matrix centered = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = centered.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) row[c] -= basis.mean[c];
  }
  return numeric::matmul_a_bt(centered, basis.components);
}

}  // namespace eli::dataio

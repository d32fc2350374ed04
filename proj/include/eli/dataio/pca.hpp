#pragma once

#include <cstddef>
#include <vector>

#include "eli/numeric/matrix.hpp"

namespace eli::dataio {

using numeric::Matrix;

struct PcaBasis {
  std::vector<double> mean;  // [D]
  Matrix components;         // [k x D], orthonormal rows, leading first
};

// Leading k principal directions of the rows of x by power iteration with
// deflation on the covariance. Each component's largest-magnitude entry is
// made positive so the basis is reproducible.
PcaBasis fit_pca(const Matrix& x, std::size_t k = 2);

// [N x k] coordinates of x in the basis.
Matrix project(const PcaBasis& basis, const Matrix& x);

}  // namespace eli::dataio

#pragma once

#include "kedit/tensor.hpp"

namespace kedit {

// Lower-triangular Cholesky factor L with A = L·Lᵀ.
// Throws NotPositiveDefinite when a pivot is ≤ 0, DimensionMismatch when A is
// not square, InvalidArgument when A is asymmetric beyond 1e-10.
Tensor cholesky(const Tensor& a);

// Solves A·X = B for symmetric positive-definite A. B may be a vector or a
// matrix with A.rows() rows.
Tensor solve_spd(const Tensor& a, const Tensor& b);

}  // namespace kedit

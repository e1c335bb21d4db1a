#include "kedit/linalg.hpp"

#include <cmath>

#include "kedit/error.hpp"

namespace kedit {

Tensor cholesky(const Tensor& a) {
  const std::size_t n = a.rows();
  if (a.rank() != 2 || a.cols() != n) throw Error(ErrorCode::kDimensionMismatch, "cholesky needs a square matrix");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(a.at(i, j) - a.at(j, i)) > 1e-10) {
        throw Error(ErrorCode::kInvalidArgument, "matrix is not symmetric");
      }
    }
  }
  Tensor l({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a.at(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l.at(j, k) * l.at(j, k);
    if (!(pivot > 0.0)) {
      throw Error(ErrorCode::kNotPositiveDefinite, "pivot " + std::to_string(j) + " is " + std::to_string(pivot));
    }
    const double d = std::sqrt(pivot);
    l.at(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = s / d;
    }
  }
  return l;
}

Tensor solve_spd(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows();
  const bool is_vector = b.rank() == 1;
  const std::size_t b_rows = is_vector ? b.size() : b.rows();
  if (b_rows != n) throw Error(ErrorCode::kDimensionMismatch, "right-hand side rows do not match A");
  const Tensor l = cholesky(a);
  const std::size_t m = is_vector ? 1 : b.cols();

  Tensor x = b;
  auto xv = [&](std::size_t i, std::size_t c) -> double& { return x.data()[i * m + c]; };
  for (std::size_t c = 0; c < m; ++c) {
    // L·y = b
    for (std::size_t i = 0; i < n; ++i) {
      double s = xv(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * xv(k, c);
      xv(i, c) = s / l.at(i, i);
    }
    // Lᵀ·x = y
    for (std::size_t ii = n; ii-- > 0;) {
      double s = xv(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l.at(k, ii) * xv(k, c);
      xv(ii, c) = s / l.at(ii, ii);
    }
  }
  return x;
}

}  // namespace kedit

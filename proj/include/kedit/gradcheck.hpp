#pragma once

#include <functional>

#include "kedit/autodiff.hpp"

namespace kedit {

// A scalar-valued differentiable computation of a single tensor input.
using ScalarComputation = std::function<ad::Var(ad::Graph&, ad::Var)>;

// Max over coordinates of |g_ad − g_fd| / (|g_fd| + 1e-12), where g_fd is the
// central finite difference with the given step. Throws NonFiniteGradient.
double grad_check(const ScalarComputation& computation, const Tensor& point, double step);

}  // namespace kedit

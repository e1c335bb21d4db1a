#include "kedit/gradcheck.hpp"

#include <cmath>

#include "kedit/error.hpp"

namespace kedit {

namespace {

double evaluate(const ScalarComputation& computation, const Tensor& x) {
  ad::Graph g;
  const ad::Var out = computation(g, g.constant(x));
  if (out.value().size() != 1) throw Error(ErrorCode::kInvalidArgument, "computation must return a scalar");
  return out.value()[0];
}

}  // namespace

double grad_check(const ScalarComputation& computation, const Tensor& point, double step) {
  if (!(step > 1e-7 && step < 1e-3)) throw Error(ErrorCode::kInvalidArgument, "step must lie in (1e-7, 1e-3)");

  ad::Graph g;
  const ad::Var x = g.leaf(point);
  const ad::Var out = computation(g, x);
  g.backward(out);
  const Tensor analytic = g.grad(x.id).empty() ? Tensor(point.shape()) : g.grad(x.id);
  if (!analytic.all_finite()) throw Error(ErrorCode::kNonFiniteGradient, "autodiff gradient is not finite");

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = evaluate(computation, probe);
    probe[i] = point[i] - step;
    const double down = evaluate(computation, probe);
    probe[i] = point[i];
    const double fd = (up - down) / (2.0 * step);
    if (!std::isfinite(fd)) throw Error(ErrorCode::kNonFiniteGradient, "finite difference is not finite");
    worst = std::max(worst, std::abs(analytic[i] - fd) / (std::abs(fd) + 1e-12));
  }
  return worst;
}

}  // namespace kedit

#include "kedit/activation.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "kedit/error.hpp"

namespace kedit {

namespace {

constexpr double kGeluCoeff = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double activation_fn(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::kGeluNew:
      return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + kGeluCoeff * x * x * x)));
    case ActivationKind::kSilu:
      return x * sigmoid(x);
  }
  return 0.0;
}

double activation_grad(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::kGeluNew: {
      const double inner = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
      const double t = std::tanh(inner);
      const double dinner = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
    }
    case ActivationKind::kSilu: {
      const double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
  }
  return 0.0;
}

std::string_view activation_name(ActivationKind kind) {
  return kind == ActivationKind::kGeluNew ? "gelu_new" : "silu";
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "gelu_new") return ActivationKind::kGeluNew;
  if (name == "silu") return ActivationKind::kSilu;
  throw Error(ErrorCode::kInvalidArgument, "unknown activation '" + std::string(name) + "'");
}

}  // namespace kedit

#pragma once

#include <string_view>

namespace kedit {

enum class ActivationKind { kGeluNew, kSilu };

// gelu_new(x) = 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))
// silu(x)     = x / (1 + e^(−x))
double activation_fn(ActivationKind kind, double x);
double activation_grad(ActivationKind kind, double x);

std::string_view activation_name(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);

}  // namespace kedit

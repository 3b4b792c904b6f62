#pragma once

#include <map>
#include <span>
#include <vector>

#include "mgcrack/tensor.hpp"

namespace mgcrack {

/// SGD with heavy-ball momentum and L2 weight decay:
///   v <- momentum * v + g + weight_decay * p
///   p <- p - lr * v
/// Velocities are created lazily at zero, keyed by parameter identity.
struct OptimState {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::map<const TensorImpl*, std::vector<double>> velocity;

  void validate() const;
};

// Updates every parameter that requires grad. A participating parameter
// without an accumulated gradient is an error.
void sgd_step(std::span<const Tensor> params, OptimState& state);

void zero_grads(std::span<const Tensor> params);

}  // namespace mgcrack

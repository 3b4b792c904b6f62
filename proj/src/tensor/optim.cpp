#include "mgcrack/optim.hpp"

#include <stdexcept>
#include <string>

namespace mgcrack {

void OptimState::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("sgd: lr must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("sgd: weight_decay must be non-negative");
}

void sgd_step(std::span<const Tensor> params, OptimState& state) {
  state.validate();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params[i];
    if (!p.requires_grad()) continue;
    if (!p.has_grad()) throw std::logic_error("sgd: parameter " + std::to_string(i) + " has no gradient");
    if (!p.is_leaf()) throw std::logic_error("sgd: parameter " + std::to_string(i) + " is not a leaf");
    TensorImpl& impl = *p.impl();
    auto& v = state.velocity[&impl];
    if (v.empty()) v.assign(impl.values.size(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = state.momentum * v[k] + impl.grad[k] + state.weight_decay * impl.values[k];
      impl.values[k] -= state.lr * v[k];
    }
  }
}

void zero_grads(std::span<const Tensor> params) {
  for (const Tensor& p : params) p.impl()->grad.clear();
}

}  // namespace mgcrack

#include "mgcrack/tensor.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mgcrack {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void TensorImpl::accumulate_grad(std::span<const double> g) {
  if (g.size() != values.size())
    throw std::logic_error("gradient size " + std::to_string(g.size()) +
                           " does not match tensor " + shape_to_string(shape));
  auto buf = grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

std::span<double> TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape)
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_to_string(shape));
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("shape " + shape_to_string(shape) + " holds " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size())
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " + shape_to_string(impl_->shape));
  return impl_->shape[axis];
}

std::size_t Tensor::ndim() const { return impl_->shape.size(); }

std::size_t Tensor::numel() const { return impl_->values.size(); }

std::span<const double> Tensor::values() const { return impl_->values; }

std::span<double> Tensor::mutable_values() { return impl_->values; }

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() needs a single-element tensor, got " + shape_to_string(shape()));
  return impl_->values[0];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const auto& s = impl_->shape;
  if (s.size() != 4) throw std::invalid_argument("at() needs a 4-D tensor, got " + shape_to_string(s));
  return impl_->values[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw std::logic_error("requires_grad can only be toggled on leaf tensors");
  impl_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return !impl_->grad_fn; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(impl_->values.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

void Tensor::backward() const {
  if (numel() != 1)
    throw std::invalid_argument("backward() needs a scalar root, got " + shape_to_string(shape()));
  if (!impl_->requires_grad) throw std::logic_error("backward() root does not require grad");

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack{{impl_.get(), 0}};
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto* inputs = node->grad_fn ? &node->grad_fn->inputs() : nullptr;
    if (inputs && next < inputs->size()) {
      TensorImpl* child = (*inputs)[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  for (TensorImpl* t : order)
    if (t->grad_fn) t->grad.clear();
  if (!impl_->grad_fn) {
    impl_->grad_buffer()[0] += 1.0;
    return;
  }
  impl_->grad.assign(1, 1.0);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (!t->grad_fn || t->grad.empty()) continue;
    t->grad_fn->backward(t->grad);
    t->grad.clear();
    t->grad.shrink_to_fit();
  }
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->values = impl_->values;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t && t->defined() && t->requires_grad(); });
}

void attach(Tensor& output, std::shared_ptr<Node> node) {
  output.impl()->requires_grad = true;
  output.impl()->grad_fn = std::move(node);
}

}  // namespace mgcrack

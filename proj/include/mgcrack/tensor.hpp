#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mgcrack {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

struct TensorImpl;

// A recorded operation in the compute graph. Each node owns references to
// the inputs it differentiates against and whatever forward state it needs.
class Node {
 public:
  virtual ~Node() = default;

  // Reads the gradient of the node's output and accumulates into the
  // gradients of its inputs.
  virtual void backward(std::span<const double> grad_out) = 0;

  const std::vector<std::shared_ptr<TensorImpl>>& inputs() const { return inputs_; }

 protected:
  std::vector<std::shared_ptr<TensorImpl>> inputs_;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;

  void accumulate_grad(std::span<const double> g);
  std::span<double> grad_buffer();  // allocates zeros on first use
};

// Dense f64 tensor with shared-handle semantics: copies alias the same
// storage and graph node. Layout is row-major, N x C x H x W for 4-D.
class Tensor {
 public:
  Tensor();
  explicit Tensor(std::shared_ptr<TensorImpl> impl);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t ndim() const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  // Zero-filled view when nothing has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad();

  // Reverse-mode sweep from a scalar root. Leaf gradients accumulate
  // across calls; intermediate buffers are released after use.
  void backward() const;

  // Same values, no graph history, requires_grad == false. Shares nothing.
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool defined() const { return static_cast<bool>(impl_); }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Thread-local switch that disables graph recording (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// True when grad recording is on and any input participates.
bool needs_grad(std::initializer_list<const Tensor*> inputs);

// Wires an op output into the graph.
void attach(Tensor& output, std::shared_ptr<Node> node);

}  // namespace mgcrack

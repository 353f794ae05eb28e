#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nvt {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;
struct TensorImpl;

// Reverse-mode record attached to the output of a tracked operation.
// backward reads out.grad and accumulates into the inputs' gradients.
struct GradNode {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
  std::shared_ptr<GradNode> node;  // null for leaves and untracked tensors
};

// Dense row-major float64 tensor. Copies of a Tensor share storage, like a
// handle; use clone() or detach() for an independent copy.
class Tensor {
 public:
  Tensor();  // rank-0 zero
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return impl_->node == nullptr; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Zeros when no gradient has been accumulated.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  // Reverse pass from this scalar. Gradients accumulate into every tracked
  // leaf; the recorded graph is released afterwards.
  void backward() const;

  Tensor detach() const;
  Tensor clone() const { return detach(); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_tracked(Shape, std::vector<double>, std::initializer_list<const Tensor*>,
                             std::function<void(const TensorImpl&)>);
  friend Tensor make_tracked(Shape, std::vector<double>, const std::vector<Tensor>&,
                             std::function<void(const TensorImpl&)>);

  std::shared_ptr<TensorImpl> impl_;
};

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an operation result. When grad mode is on and any input requires a
// gradient, the result is tracked and `backward` is attached; otherwise the
// result is a plain untracked tensor and `backward` is dropped.
Tensor make_tracked(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                    std::function<void(const TensorImpl& out)> backward);
Tensor make_tracked(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                    std::function<void(const TensorImpl& out)> backward);

// Gradient buffer of an input inside a backward rule; allocated as zeros on
// first use. Returns nullptr when the input does not require a gradient.
std::vector<double>* grad_sink(const std::shared_ptr<TensorImpl>& input);

}  // namespace nvt

#include "nvt/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "nvt/error.hpp"

namespace nvt {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

static void check_extents(const Shape& shape) {
  for (std::size_t e : shape)
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_str(shape));
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->data.assign(1, 0.0); }

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>()) {
  check_extents(shape);
  impl_->data.assign(nvt::numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : impl_(std::make_shared<TensorImpl>()) {
  check_extents(shape);
  if (nvt::numel(shape) != data.size())
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) throw ShapeError("from_rows needs a non-empty matrix");
  std::vector<double> data;
  data.reserve(rows.size() * rows.front().size());
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), rows.front().size()}, std::move(data));
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw IndexError("index rank does not match tensor rank");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= impl_->shape[axis]) throw IndexError("index out of range for shape " + shape_str(shape()));
    flat = flat * impl_->shape[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = on;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

void Tensor::backward() const {
  if (numel() != 1) throw ContractError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  if (!impl_->requires_grad) throw ContractError("backward() on a tensor that is not part of a gradient graph");

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->node && next < node->node->inputs.size()) {
      TensorImpl* child = node->node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  if (impl_->grad.empty()) impl_->grad.assign(1, 0.0);
  impl_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (t->node && !t->grad.empty()) t->node->backward(*t);
  }
  for (TensorImpl* t : order) {
    if (t->node) {
      t->node.reset();
      t->grad.clear();
      t->grad.shrink_to_fit();
      t->requires_grad = false;
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename Inputs>
static std::shared_ptr<TensorImpl> make_tracked_impl(Shape shape, std::vector<double> data, const Inputs& inputs,
                                std::function<void(const TensorImpl&)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool track = false;
  if (g_grad_enabled) {
    for (const Tensor* t : inputs)
      if (t->requires_grad()) track = true;
  }
  if (track) {
    auto node = std::make_shared<GradNode>();
    for (const Tensor* t : inputs) node->inputs.push_back(t->impl());
    node->backward = std::move(backward);
    impl->node = std::move(node);
    impl->requires_grad = true;
  }
  return impl;
}

Tensor make_tracked(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                    std::function<void(const TensorImpl&)> backward) {
  return Tensor(make_tracked_impl(std::move(shape), std::move(data), inputs, std::move(backward)));
}

Tensor make_tracked(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                    std::function<void(const TensorImpl&)> backward) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  for (const Tensor& t : inputs) ptrs.push_back(&t);
  return Tensor(make_tracked_impl(std::move(shape), std::move(data), ptrs, std::move(backward)));
}

std::vector<double>* grad_sink(const std::shared_ptr<TensorImpl>& input) {
  if (!input->requires_grad) return nullptr;
  if (input->grad.empty()) input->grad.assign(input->data.size(), 0.0);
  return &input->grad;
}

}  // namespace nvt

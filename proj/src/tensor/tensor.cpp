#include "plls/tensor/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace plls::inline PLLS_ABI {

namespace {

thread_local std::uint64_t g_sequence = 0;
thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::span<Real> TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), Real{0});
  return grad;
}

Tensor::Tensor(Shape shape, Real fill, bool requires_grad) {
  check_shape(shape);
  impl_ = std::make_shared<TensorImpl>();
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<Real> data, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor of shape " + shape_string(shape) + " cannot hold " +
                         std::to_string(data.size()) + " values");
  }
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<Real>{value}, requires_grad);
}

Tensor Tensor::vector(std::vector<Real> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<Real>> rows, bool requires_grad) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<Real> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{m, n}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(impl_->shape));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<Real> Tensor::data() { return impl_->data; }
std::span<const Real> Tensor::data() const { return impl_->data; }

Real Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  // A frozen tensor keeps no stale gradient.
  if (!flag) impl_->grad.clear();
}
bool Tensor::is_leaf() const { return !impl_->backward_fn; }

std::span<Real> Tensor::grad() { return impl_->grad; }
std::span<const Real> Tensor::grad() const { return impl_->grad; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), Real{0});
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(shape()));
  }
  if (!impl_->requires_grad) return;

  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<TensorImpl*> stack{impl_.get()};
  while (!stack.empty()) {
    TensorImpl* node = stack.back();
    stack.pop_back();
    if (!seen.insert(node).second) continue;
    if (!node->backward_fn) continue;
    order.push_back(node);
    for (const auto& parent : node->parents) {
      if (parent->requires_grad) stack.push_back(parent.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const TensorImpl* a, const TensorImpl* b) { return a->sequence > b->sequence; });

  // Interior gradients are per-pass scratch; leaf gradients accumulate.
  for (TensorImpl* node : order) node->grad.assign(node->data.size(), Real{0});
  impl_->grad_buffer()[0] += Real{1};

  for (TensorImpl* node : order) node->backward_fn(*node);
}

Tensor Tensor::detach() const {
  Tensor out(impl_->shape, impl_->data, false);
  return out;
}

Tensor Tensor::clone() const {
  Tensor out(impl_->shape, impl_->data, impl_->requires_grad);
  return out;
}

namespace autograd {

Tensor make_result(Shape shape, std::vector<Real> data, std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward_fn) {
  Tensor out(std::move(shape), std::move(data), false);
  if (!g_grad_enabled) return out;
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!tracked) return out;
  TensorImpl* impl = out.impl();
  impl->requires_grad = true;
  impl->sequence = ++g_sequence;
  impl->backward_fn = std::move(backward_fn);
  impl->parents.reserve(inputs.size());
  for (auto& input : inputs) {
    if (input.defined()) impl->parents.push_back(input.shared_impl());
  }
  return out;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace autograd

}  // namespace plls::inline PLLS_ABI

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plls/config.hpp"

namespace plls::inline PLLS_ABI {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorImpl;

// Tensor is a shared handle, like a framework tensor: copies alias the same
// storage and gradient. Use clone() for an independent copy.
//
// The gradient graph is built define-by-run. Any op that receives an input
// with requires_grad records its parents and a backward closure on the result;
// backward() visits every reachable recorded node once, newest first.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<Real> data, bool requires_grad = false);

  static Tensor scalar(Real value, bool requires_grad = false);
  static Tensor vector(std::vector<Real> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows,
                       bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  Real operator[](std::size_t flat_index) const { return data()[flat_index]; }
  Real item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;

  // Empty until the first backward pass reaches this tensor.
  std::span<Real> grad();
  std::span<const Real> grad() const;
  bool has_grad() const;
  void zero_grad();

  void backward() const;

  Tensor detach() const;
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared_impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;
  bool requires_grad = false;

  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;
  std::uint64_t sequence = 0;

  // Returns the gradient buffer, allocating zeros on first use.
  std::span<Real> grad_buffer();
};

namespace autograd {

// Builds the op result. When any input requires grad, the result joins the
// graph with the given backward closure; otherwise it is a plain constant.
Tensor make_result(Shape shape, std::vector<Real> data, std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward_fn);

// Disables graph recording on this thread for its lifetime.
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

}  // namespace autograd

}  // namespace plls::inline PLLS_ABI

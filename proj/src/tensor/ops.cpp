#include "plls/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "plls/tensor/kernels.hpp"

namespace plls::inline PLLS_ABI {

namespace {

using autograd::make_result;

template <typename Fn>
void accumulate(TensorImpl* target, Fn&& fn) {
  if (target && target->requires_grad) fn(target->grad_buffer());
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Real stable_softplus(Real x) { return std::max(x, Real{0}) + std::log1p(std::exp(-std::abs(x))); }
Real stable_sigmoid(Real x) {
  if (x >= 0) return Real{1} / (Real{1} + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real{1} + e);
}

template <typename Fwd, typename Bwd>
Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
  require_same_shape(a, b, name);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  TensorImpl* pa = a.impl();
  TensorImpl* pb = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb, bwd](TensorImpl& self) {
    const auto& g = self.grad;
    const auto& x = pa->data;
    const auto& y = pb->data;
    if (pa->requires_grad) {
      auto ga = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(x[i], y[i], true);
    }
    if (pb->requires_grad) {
      auto gb = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * bwd(x[i], y[i], false);
    }
  });
}

struct BatchedImage {
  std::size_t batch, channels, height, width;
  bool batched;
};

BatchedImage image_layout(const Tensor& t, const char* op) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined input");
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2), false};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), true};
  throw DimensionError(std::string(op) + ": expected [C x H x W] or [B x C x H x W], got " +
                       shape_string(t.shape()));
}

}  // namespace

std::string_view unary_name(Unary op) {
  switch (op) {
    case Unary::Relu: return "relu";
    case Unary::Tanh: return "tanh";
    case Unary::Sigmoid: return "sigmoid";
    case Unary::Exp: return "exp";
    case Unary::Log: return "log";
    case Unary::Softplus: return "softplus";
  }
  return "?";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<Real> out(m * n);
  kernels::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data(), false);
  TensorImpl* pa = a.impl();
  TensorImpl* pb = b.impl();
  return make_result({m, n}, std::move(out), {a, b}, [pa, pb, m, n, k](TensorImpl& self) {
    accumulate(pa, [&](std::span<Real> ga) {
      kernels::gemm_nt(m, k, n, self.grad.data(), pb->data.data(), ga.data(), true);
    });
    accumulate(pb, [&](std::span<Real> gb) {
      kernels::gemm_tn(k, n, m, pa->data.data(), self.grad.data(), gb.data(), true);
    });
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  if (w.dim(1) != in) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weights " +
                         shape_string(w.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weights " +
                         shape_string(w.shape()));
  }
  std::vector<Real> out(batch * out_dim);
  kernels::gemm_nt(batch, out_dim, in, x.data().data(), w.data().data(), out.data(), false);
  if (bias.defined()) {
    const auto bv = bias.data();
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t j = 0; j < out_dim; ++j) out[r * out_dim + j] += bv[j];
  }
  TensorImpl* px = x.impl();
  TensorImpl* pw = w.impl();
  TensorImpl* pb = bias.defined() ? bias.impl() : nullptr;
  return make_result({batch, out_dim}, std::move(out), {x, w, bias},
                     [px, pw, pb, batch, in, out_dim](TensorImpl& self) {
                       const Real* g = self.grad.data();
                       accumulate(px, [&](std::span<Real> gx) {
                         kernels::gemm_nn(batch, in, out_dim, g, pw->data.data(), gx.data(), true);
                       });
                       accumulate(pw, [&](std::span<Real> gw) {
                         kernels::gemm_tn(out_dim, in, batch, g, px->data.data(), gw.data(), true);
                       });
                       accumulate(pb, [&](std::span<Real> gb) {
                         for (std::size_t r = 0; r < batch; ++r)
                           for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[r * out_dim + j];
                       });
                     });
}

Tensor add_rows(const Tensor& x, const Tensor& v) {
  require_rank(x, 2, "add_rows");
  require_rank(v, 1, "add_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (v.dim(0) != cols) {
    throw DimensionError("add_rows: " + shape_string(x.shape()) + " + " + shape_string(v.shape()));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  const auto vv = v.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] += vv[j];
  TensorImpl* px = x.impl();
  TensorImpl* pv = v.impl();
  return make_result(x.shape(), std::move(out), {x, v}, [px, pv, rows, cols](TensorImpl& self) {
    const auto& g = self.grad;
    accumulate(px, [&](std::span<Real> gx) {
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
    accumulate(pv, [&](std::span<Real> gv) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) gv[j] += g[r * cols + j];
    });
  });
}

Tensor broadcast_rows(const Tensor& v, std::size_t rows) {
  require_rank(v, 1, "broadcast_rows");
  if (rows == 0) throw DimensionError("broadcast_rows: zero rows");
  const std::size_t cols = v.dim(0);
  std::vector<Real> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) std::copy(v.data().begin(), v.data().end(), out.begin() + r * cols);
  TensorImpl* pv = v.impl();
  return make_result({rows, cols}, std::move(out), {v}, [pv, rows, cols](TensorImpl& self) {
    accumulate(pv, [&](std::span<Real> gv) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) gv[j] += self.grad[r * cols + j];
    });
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "add", [](Real x, Real y) { return x + y; }, [](Real, Real, bool) { return Real{1}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "sub", [](Real x, Real y) { return x - y; },
      [](Real, Real, bool first) { return first ? Real{1} : Real{-1}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "mul", [](Real x, Real y) { return x * y; },
      [](Real x, Real y, bool first) { return first ? y : x; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  // Ties route the gradient to the first argument.
  return binary_same_shape(
      a, b, "minimum", [](Real x, Real y) { return std::min(x, y); },
      [](Real x, Real y, bool first) {
        const bool first_wins = x <= y;
        return (first == first_wins) ? Real{1} : Real{0};
      });
}

Tensor scale(const Tensor& x, Real factor) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (Real& v : out) v *= factor;
  TensorImpl* px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px, factor](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * self.grad[i];
    });
  });
}

Tensor add_scalar(const Tensor& x, Real shift) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (Real& v : out) v += shift;
  TensorImpl* px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    });
  });
}

Tensor square(const Tensor& x) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (Real& v : out) v *= v;
  TensorImpl* px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += Real{2} * px->data[i] * self.grad[i];
    });
  });
}

Tensor clamp(const Tensor& x, Real lo, Real hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (Real& v : out) v = std::clamp(v, lo, hi);
  TensorImpl* px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px, lo, hi](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const Real v = px->data[i];
        if (v >= lo && v <= hi) gx[i] += self.grad[i];
      }
    });
  });
}

Tensor elementwise(Unary op, const Tensor& x) {
  const auto xv = x.data();
  std::vector<Real> out(xv.size());
  switch (op) {
    case Unary::Relu:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0 ? xv[i] : Real{0};
      break;
    case Unary::Tanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
      break;
    case Unary::Sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(xv[i]);
      break;
    case Unary::Exp:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(xv[i]);
      break;
    case Unary::Log:
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(xv[i] > 0)) {
          std::ostringstream msg;
          msg << "log of non-positive value " << xv[i] << " at index " << i;
          throw DomainError(msg.str());
        }
        out[i] = std::log(xv[i]);
      }
      break;
    case Unary::Softplus:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_softplus(xv[i]);
      break;
  }
  TensorImpl* px = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [px, op](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      const auto& g = self.grad;
      const auto& y = self.data;
      const auto& in = px->data;
      for (std::size_t i = 0; i < gx.size(); ++i) {
        Real d = 0;
        switch (op) {
          case Unary::Relu: d = in[i] > 0 ? Real{1} : Real{0}; break;
          case Unary::Tanh: d = Real{1} - y[i] * y[i]; break;
          case Unary::Sigmoid: d = y[i] * (Real{1} - y[i]); break;
          case Unary::Exp: d = y[i]; break;
          case Unary::Log: d = Real{1} / in[i]; break;
          case Unary::Softplus: d = stable_sigmoid(in[i]); break;
        }
        gx[i] += g[i] * d;
      }
    });
  });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  TensorImpl* px = x.impl();
  return make_result(Shape{}, {total}, {x}, [px](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      const Real g = self.grad[0];
      for (Real& v : gx) v += g;
    });
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), Real{1} / static_cast<Real>(x.numel()));
}

Tensor sum_rows(const Tensor& x) {
  require_rank(x, 2, "sum_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<Real> out(rows, Real{0});
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) out[r] += xv[r * cols + j];
  TensorImpl* px = x.impl();
  return make_result({rows}, std::move(out), {x}, [px, rows, cols](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) gx[r * cols + j] += self.grad[r];
    });
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  TensorImpl* px = x.impl();
  return make_result(std::move(shape), std::move(out), {x}, [px](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    });
  });
}

Tensor slice_columns(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank(x, 2, "slice_columns");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || begin + count > cols) {
    throw DimensionError("slice_columns: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + shape_string(x.shape()));
  }
  std::vector<Real> out(rows * count);
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xv.begin() + r * cols + begin, count, out.begin() + r * count);
  TensorImpl* px = x.impl();
  return make_result({rows, count}, std::move(out), {x}, [px, rows, cols, begin, count](TensorImpl& self) {
    accumulate(px, [&](std::span<Real> gx) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < count; ++j) gx[r * cols + begin + j] += self.grad[r * count + j];
    });
  });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
  const BatchedImage img = image_layout(input, "conv2d");
  require_rank(kernels, 4, "conv2d");
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  const std::size_t filters = kernels.dim(0), k = kernels.dim(2);
  if (kernels.dim(1) != img.channels || kernels.dim(3) != k) {
    throw DimensionError("conv2d: kernels " + shape_string(kernels.shape()) + " do not match input " +
                         shape_string(input.shape()));
  }
  if (k > img.height || k > img.width) {
    throw DimensionError("conv2d: kernel " + shape_string(kernels.shape()) + " larger than input " +
                         shape_string(input.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != filters)) {
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " for " + std::to_string(filters) +
                         " filters");
  }
  const kernels::ConvGeometry g{img.batch, img.channels, img.height, img.width, k, stride};
  const std::size_t positions = g.out_positions(), cols = img.batch * positions, patch = g.patch_size();

  std::vector<Real> columns(patch * cols);
  kernels::im2col(g, input.data().data(), columns.data());
  std::vector<Real> product(filters * cols);
  kernels::gemm_nn(filters, cols, patch, kernels.data().data(), columns.data(), product.data(), false);
  std::vector<Real> out(img.batch * filters * positions);
  for (std::size_t b = 0; b < img.batch; ++b)
    for (std::size_t f = 0; f < filters; ++f) {
      const Real shift = bias.defined() ? bias.data()[f] : Real{0};
      const Real* src = product.data() + f * cols + b * positions;
      Real* dst = out.data() + (b * filters + f) * positions;
      for (std::size_t p = 0; p < positions; ++p) dst[p] = src[p] + shift;
    }

  Shape shape = img.batched ? Shape{img.batch, filters, g.out_height(), g.out_width()}
                            : Shape{filters, g.out_height(), g.out_width()};
  TensorImpl* px = input.impl();
  TensorImpl* pk = kernels.impl();
  TensorImpl* pb = bias.defined() ? bias.impl() : nullptr;
  const bool need_columns = kernels.requires_grad();
  if (!need_columns) columns.clear();
  return make_result(
      std::move(shape), std::move(out), {input, kernels, bias},
      [px, pk, pb, g, filters, columns = std::move(columns)](TensorImpl& self) {
        const std::size_t positions = g.out_positions(), cols = g.batch * positions, patch = g.patch_size();
        std::vector<Real> d_product(filters * cols);
        for (std::size_t b = 0; b < g.batch; ++b)
          for (std::size_t f = 0; f < filters; ++f)
            std::copy_n(self.grad.data() + (b * filters + f) * positions, positions,
                        d_product.data() + f * cols + b * positions);
        accumulate(pk, [&](std::span<Real> gk) {
          kernels::gemm_nt(filters, patch, cols, d_product.data(), columns.data(), gk.data(), true);
        });
        accumulate(pb, [&](std::span<Real> gb) {
          for (std::size_t f = 0; f < filters; ++f)
            for (std::size_t c = 0; c < cols; ++c) gb[f] += d_product[f * cols + c];
        });
        accumulate(px, [&](std::span<Real> gx) {
          std::vector<Real> d_columns(patch * cols);
          kernels::gemm_tn(patch, cols, filters, pk->data.data(), d_product.data(), d_columns.data(), false);
          kernels::col2im(g, d_columns.data(), gx.data());
        });
      });
}

Tensor deconv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
  const BatchedImage img = image_layout(input, "deconv2d");
  require_rank(kernels, 4, "deconv2d");
  if (stride == 0) throw DimensionError("deconv2d: stride must be positive");
  const std::size_t out_channels = kernels.dim(1), k = kernels.dim(2);
  if (kernels.dim(0) != img.channels || kernels.dim(3) != k) {
    throw DimensionError("deconv2d: kernels " + shape_string(kernels.shape()) + " do not match input " +
                         shape_string(input.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_channels)) {
    throw DimensionError("deconv2d: bias " + shape_string(bias.shape()) + " for " +
                         std::to_string(out_channels) + " output channels");
  }
  const std::size_t out_h = (img.height - 1) * stride + k, out_w = (img.width - 1) * stride + k;
  // Geometry of the adjoint convolution: its input is our output.
  const kernels::ConvGeometry g{img.batch, out_channels, out_h, out_w, k, stride};
  const std::size_t positions = img.height * img.width, cols = img.batch * positions, patch = g.patch_size();
  const std::size_t in_channels = img.channels;

  std::vector<Real> gathered(in_channels * cols);
  for (std::size_t b = 0; b < img.batch; ++b)
    for (std::size_t c = 0; c < in_channels; ++c)
      std::copy_n(input.data().data() + (b * in_channels + c) * positions, positions,
                  gathered.data() + c * cols + b * positions);
  std::vector<Real> columns(patch * cols);
  kernels::gemm_tn(patch, cols, in_channels, kernels.data().data(), gathered.data(), columns.data(), false);
  std::vector<Real> out(img.batch * out_channels * out_h * out_w, Real{0});
  kernels::col2im(g, columns.data(), out.data());
  if (bias.defined()) {
    const std::size_t plane = out_h * out_w;
    for (std::size_t b = 0; b < img.batch; ++b)
      for (std::size_t c = 0; c < out_channels; ++c) {
        Real* dst = out.data() + (b * out_channels + c) * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] += bias.data()[c];
      }
  }

  Shape shape = img.batched ? Shape{img.batch, out_channels, out_h, out_w} : Shape{out_channels, out_h, out_w};
  TensorImpl* px = input.impl();
  TensorImpl* pk = kernels.impl();
  TensorImpl* pb = bias.defined() ? bias.impl() : nullptr;
  if (!kernels.requires_grad()) gathered.clear();
  return make_result(
      std::move(shape), std::move(out), {input, kernels, bias},
      [px, pk, pb, g, in_channels, gathered = std::move(gathered)](TensorImpl& self) {
        const std::size_t positions = g.out_positions(), cols = g.batch * positions, patch = g.patch_size();
        std::vector<Real> d_columns(patch * cols);
        kernels::im2col(g, self.grad.data(), d_columns.data());
        accumulate(pk, [&](std::span<Real> gk) {
          kernels::gemm_nt(in_channels, patch, cols, gathered.data(), d_columns.data(), gk.data(), true);
        });
        accumulate(pb, [&](std::span<Real> gb) {
          const std::size_t plane = g.height * g.width;
          for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t c = 0; c < g.in_channels; ++c) {
              const Real* src = self.grad.data() + (b * g.in_channels + c) * plane;
              Real total = 0;
              for (std::size_t p = 0; p < plane; ++p) total += src[p];
              gb[c] += total;
            }
        });
        accumulate(px, [&](std::span<Real> gx) {
          std::vector<Real> d_gathered(in_channels * cols);
          kernels::gemm_nn(in_channels, cols, patch, pk->data.data(), d_columns.data(), d_gathered.data(), false);
          for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t c = 0; c < in_channels; ++c) {
              const Real* src = d_gathered.data() + c * cols + b * positions;
              Real* dst = gx.data() + (b * in_channels + c) * positions;
              for (std::size_t p = 0; p < positions; ++p) dst[p] += src[p];
            }
        });
      });
}

}  // namespace plls::inline PLLS_ABI

#pragma once

#include <string_view>

#include "plls/tensor/tensor.hpp"

namespace plls::inline PLLS_ABI {

enum class Unary { Relu, Tanh, Sigmoid, Exp, Log, Softplus };

std::string_view unary_name(Unary op);

/// [m x k] * [k x n]; dA = dC B^T, dB = A^T dC.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[B x in] * w[out x in]^T + bias[out]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

/// Adds v[N] to every row of x[B x N] (the one supported broadcast).
Tensor add_rows(const Tensor& x, const Tensor& v);

/// Repeats v[N] into a [rows x N] matrix; the gradient sums over rows.
Tensor broadcast_rows(const Tensor& v, std::size_t rows);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);
Tensor add_scalar(const Tensor& x, Real shift);
Tensor square(const Tensor& x);
/// Values outside [lo, hi] are clamped and receive zero gradient.
Tensor clamp(const Tensor& x, Real lo, Real hi);

Tensor elementwise(Unary op, const Tensor& x);
inline Tensor relu(const Tensor& x) { return elementwise(Unary::Relu, x); }
inline Tensor tanh(const Tensor& x) { return elementwise(Unary::Tanh, x); }
inline Tensor sigmoid(const Tensor& x) { return elementwise(Unary::Sigmoid, x); }
inline Tensor exp(const Tensor& x) { return elementwise(Unary::Exp, x); }
/// Throws DomainError for any non-positive element.
inline Tensor log(const Tensor& x) { return elementwise(Unary::Log, x); }
inline Tensor softplus(const Tensor& x) { return elementwise(Unary::Softplus, x); }

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sums the trailing axis: [B x N] -> [B].
Tensor sum_rows(const Tensor& x);

/// Same data under a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

/// Selects columns [begin, begin + count) of x[B x N].
Tensor slice_columns(const Tensor& x, std::size_t begin, std::size_t count);

/// Valid cross-correlation. input [C x H x W] or [B x C x H x W], kernels
/// [F x C x k x k], bias [F] (may be undefined). Output spatial size is
/// floor((H - k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride);

/// Transposed convolution, the adjoint of conv2d with the same stride.
/// input [C x H x W] or [B x C x H x W], kernels [C x F x k x k], bias [F].
/// Output spatial size is (H - 1) * stride + k.
Tensor deconv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride);

}  // namespace plls::inline PLLS_ABI

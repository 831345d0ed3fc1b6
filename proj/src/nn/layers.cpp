#include "plls/nn/layers.hpp"

#include <cmath>

namespace plls::inline PLLS_ABI::nn {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "linear") return Activation::Linear;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

Tensor activate(Activation a, const Tensor& x) {
  switch (a) {
    case Activation::Linear: return x;
    case Activation::Relu: return relu(x);
    case Activation::Tanh: return tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
  }
  return x;
}

ParamCount param_count(std::span<const Tensor> params) {
  ParamCount count;
  for (const auto& p : params) {
    count.total += p.numel();
    if (p.requires_grad()) count.trainable += p.numel();
  }
  return count;
}

void set_trainable(std::span<Tensor> params, bool trainable) {
  for (auto& p : params) p.set_requires_grad(trainable);
}

Real init_bound(std::size_t fan_in, Activation activation) {
  const Real gain = activation == Activation::Relu ? std::sqrt(Real{2}) : Real{1};
  return gain * std::sqrt(Real{3} / static_cast<Real>(fan_in));
}

void init_uniform(Tensor& weights, std::size_t fan_in, Real bound, Rng& rng) {
  (void)fan_in;
  for (Real& w : weights.data()) w = rng.uniform(-bound, bound);
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : weight(Shape{out, in}, Real{0}, true), bias(Shape{out}, Real{0}, true), activation(act) {}

Tensor DenseLayer::forward(const Tensor& x) const { return activate(activation, linear(x, weight, bias)); }

void DenseLayer::init(Rng& rng, Real gain_scale) {
  init_uniform(weight, in_features(), gain_scale * init_bound(in_features(), activation), rng);
  std::fill(bias.data().begin(), bias.data().end(), Real{0});
}

Tensor forward_mlp(std::span<const DenseLayer> net, const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (h.rank() != 2 || h.dim(1) != net[i].in_features()) {
      throw DimensionError("mlp layer " + std::to_string(i) + " expects " + std::to_string(net[i].in_features()) +
                           " inputs, got " + shape_string(h.shape()));
    }
    h = net[i].forward(h);
  }
  return h;
}

Mlp::Mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Activation hidden_act,
         Activation output_act) {
  std::size_t width = in;
  for (std::size_t h : hidden) {
    layers.emplace_back(width, h, hidden_act);
    width = h;
  }
  layers.emplace_back(width, out, output_act);
}

Mlp Mlp::stack(std::size_t in, const std::vector<std::size_t>& widths, Activation act) {
  Mlp mlp;
  std::size_t width = in;
  for (std::size_t h : widths) {
    mlp.layers.emplace_back(width, h, act);
    width = h;
  }
  return mlp;
}

void Mlp::init(Rng& rng) {
  for (auto& layer : layers) layer.init(rng);
}

std::vector<Tensor> Mlp::parameters() const { return collect_parameters(layers); }

ConvLayer::ConvLayer(std::size_t channels, std::size_t filters, std::size_t kernel, std::size_t stride_,
                     Activation act)
    : kernels(Shape{filters, channels, kernel, kernel}, Real{0}, true),
      bias(Shape{filters}, Real{0}, true),
      stride(stride_),
      activation(act) {}

Tensor ConvLayer::forward(const Tensor& x) const { return activate(activation, conv2d(x, kernels, bias, stride)); }

void ConvLayer::init(Rng& rng) {
  const std::size_t fan_in = kernels.dim(1) * kernels.dim(2) * kernels.dim(3);
  init_uniform(kernels, fan_in, init_bound(fan_in, activation), rng);
  std::fill(bias.data().begin(), bias.data().end(), Real{0});
}

DeconvLayer::DeconvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                         std::size_t stride_, Activation act)
    : kernels(Shape{in_channels, out_channels, kernel, kernel}, Real{0}, true),
      bias(Shape{out_channels}, Real{0}, true),
      stride(stride_),
      activation(act) {}

Tensor DeconvLayer::forward(const Tensor& x) const {
  return activate(activation, deconv2d(x, kernels, bias, stride));
}

void DeconvLayer::init(Rng& rng) {
  // Each output pixel receives about in_channels * (k / stride)^2 terms.
  const std::size_t k = kernels.dim(2);
  const std::size_t per_axis = std::max<std::size_t>(1, k / stride);
  const std::size_t fan_in = kernels.dim(0) * per_axis * per_axis;
  init_uniform(kernels, fan_in, init_bound(fan_in, activation), rng);
  std::fill(bias.data().begin(), bias.data().end(), Real{0});
}

std::vector<std::size_t> ConvStackShape::encoder_sizes() const {
  std::vector<std::size_t> sizes{resolution};
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const std::size_t s = sizes.back();
    if (s < kernel) {
      throw DimensionError("conv stack: resolution " + std::to_string(resolution) + " too small for " +
                           std::to_string(filters.size()) + " layers");
    }
    sizes.push_back((s - kernel) / stride + 1);
  }
  return sizes;
}

std::size_t ConvStackShape::flat_features() const {
  const std::size_t s = encoder_sizes().back();
  return filters.back() * s * s;
}

std::vector<std::size_t> ConvStackShape::decoder_kernels() const {
  const auto sizes = encoder_sizes();
  std::vector<std::size_t> kernels;
  for (std::size_t i = sizes.size() - 1; i > 0; --i) {
    kernels.push_back(sizes[i - 1] - (sizes[i] - 1) * stride);
  }
  return kernels;
}

std::vector<ConvLayer> make_conv_encoder(const ConvStackShape& shape) {
  std::vector<ConvLayer> layers;
  std::size_t channels = shape.channels;
  shape.encoder_sizes();
  for (std::size_t f : shape.filters) {
    layers.emplace_back(channels, f, shape.kernel, shape.stride, Activation::Relu);
    channels = f;
  }
  return layers;
}

std::vector<DeconvLayer> make_deconv_decoder(const ConvStackShape& shape, Activation output) {
  const auto kernels = shape.decoder_kernels();
  std::vector<DeconvLayer> layers;
  const std::size_t n = shape.filters.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t in = shape.filters[n - 1 - i];
    const bool last = i + 1 == n;
    const std::size_t out = last ? shape.channels : shape.filters[n - 2 - i];
    layers.emplace_back(in, out, kernels[i], shape.stride, last ? output : Activation::Relu);
  }
  return layers;
}

Tensor forward_conv_stack(std::span<const ConvLayer> stack, const Tensor& images) {
  Tensor h = images;
  for (const auto& layer : stack) h = layer.forward(h);
  const std::size_t batch = h.dim(0);
  return reshape(h, Shape{batch, h.numel() / batch});
}

}  // namespace plls::inline PLLS_ABI::nn

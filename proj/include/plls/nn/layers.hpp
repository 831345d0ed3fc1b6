#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plls/rng.hpp"
#include "plls/tensor/ops.hpp"

namespace plls::inline PLLS_ABI::nn {

enum class Activation { Linear, Relu, Tanh, Sigmoid };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);
Tensor activate(Activation a, const Tensor& x);

struct ParamCount {
  std::size_t total = 0;
  std::size_t trainable = 0;

  ParamCount& operator+=(const ParamCount& other) {
    total += other.total;
    trainable += other.trainable;
    return *this;
  }
  friend ParamCount operator+(ParamCount a, const ParamCount& b) { return a += b; }
  friend bool operator==(const ParamCount&, const ParamCount&) = default;
};

/// Counts elements; trainable means requires_grad.
ParamCount param_count(std::span<const Tensor> params);

void set_trainable(std::span<Tensor> params, bool trainable);

// Fan-in scaled uniform: U(-b, b), b = gain * sqrt(3 / fan_in); gain is
// sqrt(2) ahead of relu and 1 otherwise.
Real init_bound(std::size_t fan_in, Activation activation);
void init_uniform(Tensor& weights, std::size_t fan_in, Real bound, Rng& rng);

struct DenseLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  Activation activation = Activation::Linear;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act);

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  /// x is [batch x in]; returns [batch x out].
  Tensor forward(const Tensor& x) const;
  void init(Rng& rng, Real gain_scale = 1);
  std::vector<Tensor> parameters() const { return {weight, bias}; }
};

/// Composes the layers in order; throws DimensionError if widths do not chain.
Tensor forward_mlp(std::span<const DenseLayer> net, const Tensor& x);

struct Mlp {
  std::vector<DenseLayer> layers;

  Mlp() = default;
  /// in -> hidden... -> out, hidden layers use `hidden`, the last `output`.
  Mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Activation hidden_act,
      Activation output_act);
  /// Hidden stack only (no separate output layer).
  static Mlp stack(std::size_t in, const std::vector<std::size_t>& widths, Activation act);

  bool empty() const { return layers.empty(); }
  std::size_t in_features() const { return layers.front().in_features(); }
  std::size_t out_features() const { return layers.back().out_features(); }
  Tensor forward(const Tensor& x) const { return forward_mlp(layers, x); }
  void init(Rng& rng);
  std::vector<Tensor> parameters() const;
};

struct ConvLayer {
  Tensor kernels;  // [filters x channels x k x k]
  Tensor bias;     // [filters]
  std::size_t stride = 1;
  Activation activation = Activation::Relu;

  ConvLayer() = default;
  ConvLayer(std::size_t channels, std::size_t filters, std::size_t kernel, std::size_t stride, Activation act);
  Tensor forward(const Tensor& x) const;
  void init(Rng& rng);
  std::vector<Tensor> parameters() const { return {kernels, bias}; }
};

struct DeconvLayer {
  Tensor kernels;  // [in_channels x out_channels x k x k]
  Tensor bias;     // [out_channels]
  std::size_t stride = 1;
  Activation activation = Activation::Relu;

  DeconvLayer() = default;
  DeconvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
              Activation act);
  Tensor forward(const Tensor& x) const;
  void init(Rng& rng);
  std::vector<Tensor> parameters() const { return {kernels, bias}; }
};

// Square image geometry of a stride-2 valid conv encoder and its mirrored
// decoder. Each decoder kernel is sized so the stack lands exactly back on
// the encoder's input resolution.
struct ConvStackShape {
  std::size_t channels = 3;
  std::size_t resolution = 64;
  std::vector<std::size_t> filters{32, 64, 128, 256};
  std::size_t kernel = 4;
  std::size_t stride = 2;

  /// Spatial size after each encoder layer (first entry is the input).
  std::vector<std::size_t> encoder_sizes() const;
  std::size_t flat_features() const;
  /// Kernel per decoder layer, applied from the bottleneck outwards.
  std::vector<std::size_t> decoder_kernels() const;
};

std::vector<ConvLayer> make_conv_encoder(const ConvStackShape& shape);
/// Mirror decoder from [filters.back() x s x s] back to [channels x r x r];
/// the last layer uses `output`.
std::vector<DeconvLayer> make_deconv_decoder(const ConvStackShape& shape, Activation output);

/// Flattens [B x C x H x W] to [B x C*H*W] after the conv stack.
Tensor forward_conv_stack(std::span<const ConvLayer> stack, const Tensor& images);

template <typename Layers>
std::vector<Tensor> collect_parameters(const Layers& layers) {
  std::vector<Tensor> out;
  for (const auto& layer : layers) {
    for (auto& p : layer.parameters()) out.push_back(p);
  }
  return out;
}

}  // namespace plls::inline PLLS_ABI::nn

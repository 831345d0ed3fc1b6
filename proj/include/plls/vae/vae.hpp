#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "plls/descriptor.hpp"
#include "plls/nn/gaussian.hpp"
#include "plls/nn/layers.hpp"
#include "plls/vae/samples.hpp"

namespace plls::inline PLLS_ABI::vae {

enum class VaeKind { Mlp, Conv };

struct VaeConfig {
  VaeKind kind = VaeKind::Mlp;
  // MLP variant: flat input of `input_dim` features.
  std::size_t input_dim = 1;
  std::vector<std::size_t> encoder_widths{32, 16, 8};
  std::vector<std::size_t> decoder_widths{8, 16, 32};
  nn::Activation hidden_activation = nn::Activation::Tanh;
  // One per output feature for MLPs, a single entry for images. Empty means
  // linear everywhere.
  std::vector<nn::Activation> output_activations;
  // Conv variant: square images.
  nn::ConvStackShape conv;

  std::size_t latent_dim = 3;
  Real learning_rate = Real(1e-3);
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  Real kl_weight = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  Shape sample_shape() const;
  Descriptor descriptor() const;
  static VaeConfig from_descriptor(const Descriptor& d);
};

// Encoder (inference network) producing a diagonal Gaussian over the latent
// space, and decoder (generation network) mapping latents back to the input
// space. Parameters are created and initialized from config.seed.
class VaeModel {
 public:
  explicit VaeModel(VaeConfig config);

  const VaeConfig& config() const { return config_; }
  std::size_t latent_dim() const { return config_.latent_dim; }

  /// x: [batch x sample_shape...] -> params of shape [batch x latent_dim].
  nn::GaussianParams encode(const Tensor& x) const;
  /// z: [batch x latent_dim] -> [batch x sample_shape...].
  Tensor decode(const Tensor& z) const;

  std::vector<Tensor> parameters() const;
  std::vector<Tensor> encoder_parameters() const;
  std::vector<Tensor> decoder_parameters() const;
  void set_trainable(bool trainable);
  nn::ParamCount param_count() const;

  void save(const std::filesystem::path& path) const;
  static VaeModel load(const std::filesystem::path& path);

 private:
  void init();

  VaeConfig config_;
  nn::Mlp mlp_encoder_;
  std::vector<nn::ConvLayer> conv_encoder_;
  nn::DenseLayer mean_head_;
  nn::DenseLayer log_std_head_;
  nn::Mlp mlp_decoder_;
  nn::DenseLayer decoder_input_;
  std::vector<nn::DeconvLayer> deconv_decoder_;
};

/// Applies activations[j] to column j of x[batch x n] (size-1 list: all columns).
Tensor activate_columns(const Tensor& x, std::span<const nn::Activation> activations);

/// z = mu + exp(log_std) * epsilon; gradients reach mu and log_std only.
Tensor reparameterize(const nn::GaussianParams& params, const Tensor& epsilon);

/// KL(N(mu, sigma^2) || N(0, I)) = sum_i 0.5 (mu_i^2 + sigma_i^2 - 1 - log sigma_i^2),
/// per sample ([batch]) or scalar for [d] params.
Tensor kl_standard_normal(const nn::GaussianParams& params);

struct VaeLoss {
  Tensor total;  // kl_weight * kl + recon
  Tensor kl;     // batch mean of per-sample KL
  Tensor recon;  // batch mean of per-sample sum of squared errors
};

/// Single-sample ELBO estimate with the supplied epsilon [batch x latent_dim].
VaeLoss vae_loss(const VaeModel& model, const Tensor& x, const Tensor& epsilon);

/// Sum over data dimensions of squared error, averaged over the batch.
Tensor sum_squared_error(const Tensor& x, const Tensor& reconstruction);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double kl = 0;
  double recon = 0;
};

struct TrainedVae {
  VaeModel model;
  std::vector<EpochStats> curve;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adam training. Validation stats use a fixed epsilon stream per
/// epoch; pass an empty/null validation set to skip it.
TrainedVae train_vae(const SampleSource& train, const SampleSource* validation, const VaeConfig& config,
                     const EpochCallback& on_epoch = {});

/// One row per epoch: epoch,train_loss,val_loss,kl,recon.
void write_loss_csv(std::ostream& out, const std::vector<EpochStats>& curve);

struct MseStats {
  double mean = 0;
  double std = 0;
};

/// Per-sample reconstruction MSE (mean over data dims) averaged over the test
/// set, once per epsilon draw; mean and population std across draws.
MseStats recon_mse(const VaeModel& model, const SampleSource& test, std::size_t n_eval_draws, std::uint64_t seed);

/// Deterministic round trip decode(mean(encode(x))).
Tensor reconstruct_mean(const VaeModel& model, const Tensor& x);

}  // namespace plls::inline PLLS_ABI::vae

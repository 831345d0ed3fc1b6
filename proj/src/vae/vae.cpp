#include "plls/vae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "plls/nn/adam.hpp"
#include "plls/nn/checkpoint.hpp"
#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::vae {

namespace {

Real activation_value(nn::Activation a, Real x) {
  switch (a) {
    case nn::Activation::Linear: return x;
    case nn::Activation::Relu: return x > 0 ? x : Real{0};
    case nn::Activation::Tanh: return std::tanh(x);
    case nn::Activation::Sigmoid: return Real{1} / (Real{1} + std::exp(-x));
  }
  return x;
}

// Derivative expressed through input x and output y.
Real activation_slope(nn::Activation a, Real x, Real y) {
  switch (a) {
    case nn::Activation::Linear: return 1;
    case nn::Activation::Relu: return x > 0 ? Real{1} : Real{0};
    case nn::Activation::Tanh: return 1 - y * y;
    case nn::Activation::Sigmoid: return y * (1 - y);
  }
  return 1;
}

std::string activation_list(const std::vector<nn::Activation>& acts) {
  std::string out;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    if (i) out += ',';
    out += nn::activation_name(acts[i]);
  }
  return out;
}

std::vector<nn::Activation> parse_activation_list(const std::string& text) {
  std::vector<nn::Activation> acts;
  if (text.empty()) return acts;
  for (const auto& part : split(text, ',')) acts.push_back(nn::parse_activation(part));
  return acts;
}

Tensor flatten_batch(const Tensor& x) {
  const std::size_t batch = x.dim(0);
  if (x.rank() == 2) return x;
  return reshape(x, Shape{batch, x.numel() / batch});
}

}  // namespace

void VaeConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string("vae config: ") + name + " must be positive");
  };
  positive(latent_dim, "latent_dim");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  if (!(learning_rate > 0)) throw std::invalid_argument("vae config: learning_rate must be positive");
  if (!(kl_weight >= 0)) throw std::invalid_argument("vae config: kl_weight must be non-negative");
  if (kind == VaeKind::Mlp) {
    positive(input_dim, "input_dim");
    for (std::size_t w : encoder_widths) positive(w, "encoder width");
    for (std::size_t w : decoder_widths) positive(w, "decoder width");
    if (!output_activations.empty() && output_activations.size() != 1 && output_activations.size() != input_dim) {
      throw std::invalid_argument("vae config: output activations must be 1 or input_dim entries");
    }
  } else {
    positive(conv.channels, "channels");
    positive(conv.resolution, "resolution");
    if (conv.filters.empty()) throw std::invalid_argument("vae config: conv stack needs at least one layer");
    conv.encoder_sizes();
    if (output_activations.size() > 1) throw std::invalid_argument("vae config: conv output takes one activation");
  }
}

Shape VaeConfig::sample_shape() const {
  if (kind == VaeKind::Mlp) return {input_dim};
  return {conv.channels, conv.resolution, conv.resolution};
}

Descriptor VaeConfig::descriptor() const {
  Descriptor d;
  d.set("model", std::string("vae"));
  d.set("kind", std::string(kind == VaeKind::Mlp ? "mlp" : "conv"));
  d.set("latent_dim", latent_dim);
  d.set("output_activations", activation_list(output_activations));
  d.set("learning_rate", static_cast<double>(learning_rate));
  d.set("batch_size", batch_size);
  d.set("epochs", epochs);
  d.set("seed", static_cast<std::size_t>(seed));
  d.set("kl_weight", static_cast<double>(kl_weight));
  if (kind == VaeKind::Mlp) {
    d.set("input_dim", input_dim);
    d.set_list("encoder_widths", encoder_widths);
    d.set_list("decoder_widths", decoder_widths);
    d.set("hidden_activation", std::string(nn::activation_name(hidden_activation)));
  } else {
    d.set("channels", conv.channels);
    d.set("resolution", conv.resolution);
    d.set_list("filters", conv.filters);
    d.set("kernel", conv.kernel);
    d.set("stride", conv.stride);
  }
  return d;
}

VaeConfig VaeConfig::from_descriptor(const Descriptor& d) {
  if (d.get("model") != "vae") throw std::invalid_argument("descriptor is not a vae model");
  VaeConfig c;
  c.kind = d.get("kind") == "mlp" ? VaeKind::Mlp : VaeKind::Conv;
  c.latent_dim = d.get_size("latent_dim");
  c.output_activations = parse_activation_list(d.get("output_activations"));
  c.learning_rate = static_cast<Real>(d.get_double("learning_rate"));
  c.batch_size = d.get_size("batch_size");
  c.epochs = d.get_size("epochs");
  c.seed = d.get_size("seed");
  c.kl_weight = static_cast<Real>(d.get_double("kl_weight"));
  if (c.kind == VaeKind::Mlp) {
    c.input_dim = d.get_size("input_dim");
    c.encoder_widths = d.get_list("encoder_widths");
    c.decoder_widths = d.get_list("decoder_widths");
    c.hidden_activation = nn::parse_activation(d.get("hidden_activation"));
  } else {
    c.conv.channels = d.get_size("channels");
    c.conv.resolution = d.get_size("resolution");
    c.conv.filters = d.get_list("filters");
    c.conv.kernel = d.get_size("kernel");
    c.conv.stride = d.get_size("stride");
  }
  c.validate();
  return c;
}

VaeModel::VaeModel(VaeConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t features = 0;
  if (config_.kind == VaeKind::Mlp) {
    mlp_encoder_ = nn::Mlp::stack(config_.input_dim, config_.encoder_widths, config_.hidden_activation);
    features = config_.encoder_widths.empty() ? config_.input_dim : config_.encoder_widths.back();
    mlp_decoder_ = nn::Mlp(config_.latent_dim, config_.decoder_widths, config_.input_dim, config_.hidden_activation,
                           nn::Activation::Linear);
  } else {
    conv_encoder_ = nn::make_conv_encoder(config_.conv);
    features = config_.conv.flat_features();
    decoder_input_ = nn::DenseLayer(config_.latent_dim, features, nn::Activation::Linear);
    const nn::Activation out =
        config_.output_activations.empty() ? nn::Activation::Linear : config_.output_activations.front();
    deconv_decoder_ = nn::make_deconv_decoder(config_.conv, out);
  }
  mean_head_ = nn::DenseLayer(features, config_.latent_dim, nn::Activation::Linear);
  log_std_head_ = nn::DenseLayer(features, config_.latent_dim, nn::Activation::Linear);
  init();
}

void VaeModel::init() {
  Rng rng(derive_seed(config_.seed, 0x7ae));
  mlp_encoder_.init(rng);
  for (auto& layer : conv_encoder_) layer.init(rng);
  mean_head_.init(rng);
  log_std_head_.init(rng, Real(0.1));
  mlp_decoder_.init(rng);
  if (decoder_input_.weight.defined()) decoder_input_.init(rng);
  for (auto& layer : deconv_decoder_) layer.init(rng);
}

nn::GaussianParams VaeModel::encode(const Tensor& x) const {
  const Shape expected = config_.sample_shape();
  if (x.rank() != expected.size() + 1 || !std::equal(expected.begin(), expected.end(), x.shape().begin() + 1)) {
    throw DimensionError("vae encode: expected [batch x " + shape_string(expected) + "], got " +
                         shape_string(x.shape()));
  }
  const Tensor features =
      config_.kind == VaeKind::Mlp ? mlp_encoder_.forward(x) : nn::forward_conv_stack(conv_encoder_, x);
  return {mean_head_.forward(features), log_std_head_.forward(features)};
}

Tensor VaeModel::decode(const Tensor& z) const {
  if (z.rank() != 2 || z.dim(1) != config_.latent_dim) {
    throw DimensionError("vae decode: expected [batch x " + std::to_string(config_.latent_dim) + "], got " +
                         shape_string(z.shape()));
  }
  if (config_.kind == VaeKind::Mlp) {
    Tensor out = mlp_decoder_.forward(z);
    if (config_.output_activations.empty()) return out;
    return activate_columns(out, config_.output_activations);
  }
  const std::size_t batch = z.dim(0);
  const std::size_t side = config_.conv.encoder_sizes().back();
  Tensor h = reshape(decoder_input_.forward(z), Shape{batch, config_.conv.filters.back(), side, side});
  for (const auto& layer : deconv_decoder_) h = layer.forward(h);
  return h;
}

std::vector<Tensor> VaeModel::encoder_parameters() const {
  std::vector<Tensor> out = mlp_encoder_.parameters();
  for (auto& p : nn::collect_parameters(conv_encoder_)) out.push_back(p);
  for (auto& p : mean_head_.parameters()) out.push_back(p);
  for (auto& p : log_std_head_.parameters()) out.push_back(p);
  return out;
}

std::vector<Tensor> VaeModel::decoder_parameters() const {
  std::vector<Tensor> out = mlp_decoder_.parameters();
  if (decoder_input_.weight.defined()) {
    for (auto& p : decoder_input_.parameters()) out.push_back(p);
  }
  for (auto& p : nn::collect_parameters(deconv_decoder_)) out.push_back(p);
  return out;
}

std::vector<Tensor> VaeModel::parameters() const {
  std::vector<Tensor> out = encoder_parameters();
  for (auto& p : decoder_parameters()) out.push_back(p);
  return out;
}

void VaeModel::set_trainable(bool trainable) {
  auto params = parameters();
  nn::set_trainable(params, trainable);
}

nn::ParamCount VaeModel::param_count() const {
  const auto params = parameters();
  return nn::param_count(params);
}

void VaeModel::save(const std::filesystem::path& path) const {
  const auto params = parameters();
  nn::save_checkpoint(path, config_.descriptor().str(), params);
}

VaeModel VaeModel::load(const std::filesystem::path& path) {
  const auto checkpoint = nn::load_checkpoint(path);
  VaeModel model(VaeConfig::from_descriptor(Descriptor::parse(checkpoint.descriptor)));
  auto params = model.parameters();
  nn::restore_parameters(checkpoint, params);
  return model;
}

Tensor activate_columns(const Tensor& x, std::span<const nn::Activation> activations) {
  if (x.rank() != 2) throw DimensionError("activate_columns: expected a matrix, got " + shape_string(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (activations.size() != 1 && activations.size() != cols) {
    throw DimensionError("activate_columns: " + std::to_string(activations.size()) + " activations for " +
                         std::to_string(cols) + " columns");
  }
  std::vector<nn::Activation> acts(activations.begin(), activations.end());
  if (acts.size() == 1) acts.assign(cols, acts.front());
  std::vector<Real> out(x.numel());
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = activation_value(acts[j], xv[r * cols + j]);
  TensorImpl* px = x.impl();
  return autograd::make_result(x.shape(), std::move(out), {x}, [px, acts, rows, cols](TensorImpl& self) {
    if (!px->requires_grad) return;
    auto gx = px->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t i = r * cols + j;
        gx[i] += self.grad[i] * activation_slope(acts[j], px->data[i], self.data[i]);
      }
  });
}

Tensor reparameterize(const nn::GaussianParams& params, const Tensor& epsilon) {
  if (epsilon.shape() != params.mean.shape()) {
    throw DimensionError("reparameterize: epsilon " + shape_string(epsilon.shape()) + " vs mean " +
                         shape_string(params.mean.shape()));
  }
  return add(params.mean, mul(exp(params.log_std), epsilon.detach()));
}

Tensor kl_standard_normal(const nn::GaussianParams& params) {
  // 0.5 * (mu^2 + exp(2 log_std) - 1 - 2 log_std)
  const Tensor per_dim = scale(add_scalar(sub(add(square(params.mean), exp(scale(params.log_std, Real{2}))),
                                              scale(params.log_std, Real{2})),
                                          Real{-1}),
                               Real{0.5});
  return per_dim.rank() == 1 ? sum(per_dim) : sum_rows(per_dim);
}

Tensor sum_squared_error(const Tensor& x, const Tensor& reconstruction) {
  const Tensor diff = sub(flatten_batch(reconstruction), flatten_batch(x).detach());
  return mean(sum_rows(square(diff)));
}

VaeLoss vae_loss(const VaeModel& model, const Tensor& x, const Tensor& epsilon) {
  const nn::GaussianParams posterior = model.encode(x);
  const Tensor z = reparameterize(posterior, epsilon);
  const Tensor recon = sum_squared_error(x, model.decode(z));
  const Tensor kl = mean(kl_standard_normal(posterior));
  const Tensor total = add(scale(kl, model.config().kl_weight), recon);
  return {total, kl, recon};
}

namespace {

Tensor normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor eps(Shape{rows, cols});
  for (Real& v : eps.data()) v = rng.normal();
  return eps;
}

struct Totals {
  double total = 0, kl = 0, recon = 0;
  std::size_t count = 0;
  void add(const VaeLoss& loss, std::size_t n) {
    total += static_cast<double>(loss.total.item()) * static_cast<double>(n);
    kl += static_cast<double>(loss.kl.item()) * static_cast<double>(n);
    recon += static_cast<double>(loss.recon.item()) * static_cast<double>(n);
    count += n;
  }
};

}  // namespace

TrainedVae train_vae(const SampleSource& train, const SampleSource* validation, const VaeConfig& config,
                     const EpochCallback& on_epoch) {
  config.validate();
  if (train.size() == 0) throw std::invalid_argument("train_vae: empty dataset");
  if (train.sample_shape() != config.sample_shape()) {
    throw DimensionError("train_vae: samples " + shape_string(train.sample_shape()) + " do not match model input " +
                         shape_string(config.sample_shape()));
  }
  TrainedVae result{VaeModel(config), {}};
  nn::Adam optimizer(result.model.parameters(), nn::AdamHyper{config.learning_rate});
  Rng shuffle_rng(derive_seed(config.seed, 1));
  Rng noise_rng(derive_seed(config.seed, 2));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    Totals totals;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      const Tensor x = train.batch(idx);
      const VaeLoss loss = vae_loss(result.model, x, normal_matrix(n, config.latent_dim, noise_rng));
      optimizer.zero_grad();
      loss.total.backward();
      optimizer.step();
      totals.add(loss, n);
    }
    EpochStats stats;
    stats.epoch = epoch;
    const double denom = static_cast<double>(totals.count);
    stats.train_loss = totals.total / denom;
    stats.kl = totals.kl / denom;
    stats.recon = totals.recon / denom;
    if (validation && validation->size() > 0) {
      autograd::NoGradGuard no_grad;
      Rng val_rng(derive_seed(config.seed, 1000 + epoch));
      Totals val;
      std::vector<std::size_t> idx;
      for (std::size_t start = 0; start < validation->size(); start += config.batch_size) {
        const std::size_t n = std::min(config.batch_size, validation->size() - start);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), start);
        val.add(vae_loss(result.model, validation->batch(idx), normal_matrix(n, config.latent_dim, val_rng)), n);
      }
      stats.val_loss = val.total / static_cast<double>(val.count);
    }
    result.curve.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

void write_loss_csv(std::ostream& out, const std::vector<EpochStats>& curve) {
  out << "epoch,train_loss,val_loss,kl,recon\n";
  out.precision(9);
  for (const auto& s : curve) {
    out << s.epoch << ',' << s.train_loss << ',' << s.val_loss << ',' << s.kl << ',' << s.recon << '\n';
  }
}

MseStats recon_mse(const VaeModel& model, const SampleSource& test, std::size_t n_eval_draws, std::uint64_t seed) {
  if (test.size() == 0) throw std::invalid_argument("recon_mse: empty test set");
  if (n_eval_draws == 0) throw std::invalid_argument("recon_mse: need at least one draw");
  autograd::NoGradGuard no_grad;
  const std::size_t batch = 256;
  const auto numel = static_cast<double>(test.sample_numel());
  std::vector<double> per_draw;
  std::vector<std::size_t> idx;
  for (std::size_t draw = 0; draw < n_eval_draws; ++draw) {
    Rng rng(derive_seed(seed, draw));
    double total = 0;
    for (std::size_t start = 0; start < test.size(); start += batch) {
      const std::size_t n = std::min(batch, test.size() - start);
      idx.resize(n);
      std::iota(idx.begin(), idx.end(), start);
      const Tensor x = test.batch(idx);
      const nn::GaussianParams posterior = model.encode(x);
      const Tensor x_hat = model.decode(reparameterize(posterior, normal_matrix(n, model.latent_dim(), rng)));
      const auto xv = x.data();
      const auto yv = x_hat.data();
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double d = static_cast<double>(xv[i]) - yv[i];
        total += d * d;
      }
    }
    per_draw.push_back(total / numel / static_cast<double>(test.size()));
  }
  MseStats stats;
  stats.mean = std::accumulate(per_draw.begin(), per_draw.end(), 0.0) / static_cast<double>(per_draw.size());
  double var = 0;
  for (double v : per_draw) var += (v - stats.mean) * (v - stats.mean);
  stats.std = std::sqrt(var / static_cast<double>(per_draw.size()));
  return stats;
}

Tensor reconstruct_mean(const VaeModel& model, const Tensor& x) {
  autograd::NoGradGuard no_grad;
  return model.decode(model.encode(x).mean);
}

}  // namespace plls::inline PLLS_ABI::vae

#include "plls/ppo/actor_critic.hpp"

#include "plls/nn/checkpoint.hpp"
#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::ppo {

void ActorCriticConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("actor-critic config: " + msg); };
  if (input_dim == 0) fail("input_dim must be positive");
  if (action_dim == 0) fail("action_dim must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) fail("hidden widths must be positive");
  }
  if (conv) {
    const std::size_t pixels = conv->channels * conv->resolution * conv->resolution;
    if (pixels != input_dim) {
      fail("conv input " + std::to_string(pixels) + " does not match input_dim " + std::to_string(input_dim));
    }
    conv->encoder_sizes();
  }
  if (!(mean_init_scale >= 0)) fail("mean_init_scale must be non-negative");
  if (input_offset.size() != input_scale.size()) fail("input_offset and input_scale lengths differ");
  if (!input_offset.empty() && input_offset.size() != input_dim) fail("normalizer length must equal input_dim");
}

Descriptor ActorCriticConfig::descriptor() const {
  Descriptor d;
  d.set("model", std::string("actor_critic"));
  d.set("input_dim", input_dim);
  d.set_list("hidden", hidden);
  d.set("hidden_activation", std::string(nn::activation_name(hidden_activation)));
  d.set("action_dim", action_dim);
  d.set("init_log_std", static_cast<double>(init_log_std));
  d.set("mean_init_scale", static_cast<double>(mean_init_scale));
  d.set_reals("input_offset", std::vector<double>(input_offset.begin(), input_offset.end()));
  d.set_reals("input_scale", std::vector<double>(input_scale.begin(), input_scale.end()));
  d.set("seed", static_cast<std::size_t>(seed));
  if (conv) {
    d.set("conv_channels", conv->channels);
    d.set("conv_resolution", conv->resolution);
    d.set_list("conv_filters", conv->filters);
    d.set("conv_kernel", conv->kernel);
    d.set("conv_stride", conv->stride);
  }
  return d;
}

ActorCriticConfig ActorCriticConfig::from_descriptor(const Descriptor& d) {
  if (d.get("model") != "actor_critic") throw std::invalid_argument("descriptor is not an actor-critic model");
  ActorCriticConfig c;
  c.input_dim = d.get_size("input_dim");
  c.hidden = d.get_list("hidden");
  c.hidden_activation = nn::parse_activation(d.get("hidden_activation"));
  c.action_dim = d.get_size("action_dim");
  c.init_log_std = static_cast<Real>(d.get_double("init_log_std"));
  c.mean_init_scale = static_cast<Real>(d.get_double("mean_init_scale"));
  for (double v : d.get_reals("input_offset")) c.input_offset.push_back(static_cast<Real>(v));
  for (double v : d.get_reals("input_scale")) c.input_scale.push_back(static_cast<Real>(v));
  c.seed = d.get_size("seed");
  if (d.has("conv_channels")) {
    nn::ConvStackShape s;
    s.channels = d.get_size("conv_channels");
    s.resolution = d.get_size("conv_resolution");
    s.filters = d.get_list("conv_filters");
    s.kernel = d.get_size("conv_kernel");
    s.stride = d.get_size("conv_stride");
    c.conv = s;
  }
  c.validate();
  return c;
}

ActorCritic::ActorCritic(ActorCriticConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t features = config_.input_dim;
  if (config_.conv) {
    conv_ = nn::make_conv_encoder(*config_.conv);
    features = config_.conv->flat_features();
  }
  trunk_ = nn::Mlp::stack(features, config_.hidden, config_.hidden_activation);
  const std::size_t width = config_.hidden.empty() ? features : config_.hidden.back();
  mean_head_ = nn::DenseLayer(width, config_.action_dim, nn::Activation::Linear);
  log_std_ = Tensor(Shape{config_.action_dim}, config_.init_log_std, true);
  value_head_ = nn::DenseLayer(width, 1, nn::Activation::Linear);

  Rng rng(derive_seed(config_.seed, 0xac));
  for (auto& layer : conv_) layer.init(rng);
  trunk_.init(rng);
  mean_head_.init(rng, config_.mean_init_scale);
  value_head_.init(rng);
}

ActorCritic::Output ActorCritic::forward(const Tensor& inputs) const {
  if (inputs.rank() != 2 || inputs.dim(1) != config_.input_dim) {
    throw DimensionError("actor-critic expects [batch x " + std::to_string(config_.input_dim) + "], got " +
                         shape_string(inputs.shape()));
  }
  const std::size_t batch = inputs.dim(0);
  Tensor h = inputs;
  if (!config_.input_offset.empty()) {
    const Tensor offset = Tensor::vector(config_.input_offset);
    const Tensor scale_v = broadcast_rows(Tensor::vector(config_.input_scale), batch);
    h = mul(add_rows(h, scale(offset, Real{-1})), scale_v);
  }
  if (config_.conv) {
    const auto& s = *config_.conv;
    h = nn::forward_conv_stack(conv_, reshape(h, Shape{batch, s.channels, s.resolution, s.resolution}));
  }
  h = trunk_.forward(h);
  Output out;
  out.policy.mean = mean_head_.forward(h);
  out.policy.log_std = broadcast_rows(log_std_, batch);
  out.value = reshape(value_head_.forward(h), Shape{batch});
  return out;
}

std::vector<Tensor> ActorCritic::parameters() const {
  std::vector<Tensor> out = nn::collect_parameters(conv_);
  for (auto& p : trunk_.parameters()) out.push_back(p);
  for (auto& p : mean_head_.parameters()) out.push_back(p);
  out.push_back(log_std_);
  for (auto& p : value_head_.parameters()) out.push_back(p);
  return out;
}

nn::ParamCount ActorCritic::param_count() const {
  const auto params = parameters();
  return nn::param_count(params);
}

void ActorCritic::save(const std::filesystem::path& path) const {
  const auto params = parameters();
  nn::save_checkpoint(path, config_.descriptor().str(), params);
}

ActorCritic ActorCritic::load(const std::filesystem::path& path) {
  const auto checkpoint = nn::load_checkpoint(path);
  ActorCritic model(ActorCriticConfig::from_descriptor(Descriptor::parse(checkpoint.descriptor)));
  auto params = model.parameters();
  nn::restore_parameters(checkpoint, params);
  return model;
}

void ActorCritic::copy_from(const ActorCritic& other) {
  auto dst = parameters();
  const auto src = other.parameters();
  if (dst.size() != src.size()) throw DimensionError("copy_from: parameter lists differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].shape() != src[i].shape()) throw DimensionError("copy_from: parameter shapes differ");
    std::copy(src[i].data().begin(), src[i].data().end(), dst[i].data().begin());
  }
}

}  // namespace plls::inline PLLS_ABI::ppo

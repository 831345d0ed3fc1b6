#include "plls/rollout/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "plls/io.hpp"
#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::rollout {

std::size_t Dataset::episodes() const {
  std::size_t n = 0;
  for (auto d : dones) n += d;
  return n;
}

std::shared_ptr<vae::SampleSource> Dataset::action_samples() const {
  return std::make_shared<vae::DenseSamples>(Shape{action_dim}, actions);
}

std::shared_ptr<vae::SampleSource> Dataset::observation_samples() const {
  if (quantized) return std::make_shared<vae::QuantizedSamples>(observation_shape, frames, kFrameScale);
  return std::make_shared<vae::DenseSamples>(observation_shape, observations);
}

namespace {

struct Episode {
  std::vector<Real> observations;
  std::vector<std::uint8_t> frames;
  std::vector<Real> actions;
  std::vector<Real> rewards;
  std::vector<std::uint8_t> dones;
};

void store_observation(Episode& ep, const std::vector<Real>& obs, bool quantized) {
  if (!quantized) {
    ep.observations.insert(ep.observations.end(), obs.begin(), obs.end());
    return;
  }
  for (Real v : obs) ep.frames.push_back(static_cast<std::uint8_t>(std::lround(v * Real(255))));
}

}  // namespace

Dataset collect_random(const envs::EnvSpec& spec, std::size_t n_trajectories, std::size_t max_len,
                       std::uint64_t seed, bool quantize_images) {
  if (n_trajectories == 0) throw std::invalid_argument("collect_random: need at least one trajectory");
  if (max_len == 0) throw std::invalid_argument("collect_random: max_len must be positive");
  const auto probe = envs::make_env(spec);
  Dataset data;
  data.env = spec;
  data.observation_shape = probe->observation_shape();
  data.action_dim = probe->action_box().dim();
  data.quantized = quantize_images && data.observation_shape.size() == 3;

  std::vector<Episode> episodes(n_trajectories);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n_trajectories; ++i) {
    auto env = probe->clone();
    const envs::Box box = env->action_box();
    Rng rng(derive_seed(seed, 2 * i + 1));
    Episode& ep = episodes[i];
    std::vector<Real> obs = env->reset(derive_seed(seed, 2 * i));
    std::vector<Real> action(box.dim());
    for (std::size_t t = 0; t < max_len; ++t) {
      for (std::size_t k = 0; k < box.dim(); ++k) action[k] = rng.uniform(box.low[k], box.high[k]);
      store_observation(ep, obs, data.quantized);
      ep.actions.insert(ep.actions.end(), action.begin(), action.end());
      envs::StepResult r = env->step(action);
      ep.rewards.push_back(r.reward);
      // A trajectory cut at max_len still ends with a boundary flag.
      const bool last = r.done() || t + 1 == max_len;
      ep.dones.push_back(last ? 1 : 0);
      if (last) break;
      obs = std::move(r.observation);
    }
  }
  for (auto& ep : episodes) {
    data.observations.insert(data.observations.end(), ep.observations.begin(), ep.observations.end());
    data.frames.insert(data.frames.end(), ep.frames.begin(), ep.frames.end());
    data.actions.insert(data.actions.end(), ep.actions.begin(), ep.actions.end());
    data.rewards.insert(data.rewards.end(), ep.rewards.begin(), ep.rewards.end());
    data.dones.insert(data.dones.end(), ep.dones.begin(), ep.dones.end());
  }
  return data;
}

namespace {

Descriptor dataset_descriptor(const Dataset& data) {
  Descriptor d = data.env.descriptor();
  d.set("content", std::string("transitions"));
  d.set("transitions", data.size());
  d.set_list("observation_shape", data.observation_shape);
  d.set("action_dim", data.action_dim);
  d.set("observation_encoding", std::string(data.quantized ? "u8" : "f32"));
  if (data.quantized) d.set("observation_scale", static_cast<double>(kFrameScale));
  return d;
}

}  // namespace

// Body: u64 count, then per transition: u32 observation byte length,
// observation bytes, action_dim x f32, f32 reward, u8 done.
std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  io::Writer w;
  const std::size_t n = data.size(), obs = data.observation_size();
  w.u64(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (data.quantized) {
      w.u32(static_cast<std::uint32_t>(obs));
      w.bytes(data.frames.data() + i * obs, obs);
    } else {
      w.u32(static_cast<std::uint32_t>(4 * obs));
      for (std::size_t k = 0; k < obs; ++k) w.f32(static_cast<float>(data.observations[i * obs + k]));
    }
    for (std::size_t k = 0; k < data.action_dim; ++k) w.f32(static_cast<float>(data.actions[i * data.action_dim + k]));
    w.f32(static_cast<float>(data.rewards[i]));
    w.u8(data.dones[i]);
  }
  return w.frame(io::FileKind::Dataset, dataset_descriptor(data).str());
}

Dataset decode_dataset(std::vector<std::uint8_t> bytes, const std::string& label) {
  io::Reader r(std::move(bytes), io::FileKind::Dataset, label);
  const Descriptor d = Descriptor::parse(r.descriptor());
  Dataset data;
  data.env = envs::EnvSpec::from_descriptor(d);
  data.observation_shape = d.get_list("observation_shape");
  data.action_dim = d.get_size("action_dim");
  data.quantized = d.get("observation_encoding") == "u8";
  const std::uint64_t n = r.u64();
  if (n != d.get_size("transitions")) throw io::BadMagicError(label + ": transition count disagrees with header");
  const std::size_t obs = data.observation_size();
  const std::size_t obs_bytes = data.quantized ? obs : 4 * obs;
  data.rewards.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (r.u32() != obs_bytes) throw io::BadMagicError(label + ": record " + std::to_string(i) + " has wrong size");
    if (data.quantized) {
      const std::size_t at = data.frames.size();
      data.frames.resize(at + obs);
      r.bytes(data.frames.data() + at, obs);
    } else {
      for (std::size_t k = 0; k < obs; ++k) data.observations.push_back(static_cast<Real>(r.f32()));
    }
    for (std::size_t k = 0; k < data.action_dim; ++k) data.actions.push_back(static_cast<Real>(r.f32()));
    data.rewards.push_back(static_cast<Real>(r.f32()));
    data.dones.push_back(r.u8());
  }
  if (!r.at_end()) throw io::BadMagicError(label + ": trailing bytes after the last record");
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  const auto bytes = encode_dataset(data);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dataset(std::move(bytes), path.string());
}

}  // namespace plls::inline PLLS_ABI::rollout

#include "plls/nn/checkpoint.hpp"

#include <fstream>
#include <iterator>

namespace plls::inline PLLS_ABI::nn {

namespace {

[[maybe_unused]] void write_values(io::Writer& w, std::span<const float> data) { w.f32_array(data.data(), data.size()); }
[[maybe_unused]] void write_values(io::Writer& w, std::span<const double> data) {
  for (double v : data) w.f32(static_cast<float>(v));
}

io::Writer write_body(std::span<const Tensor> params) {
  io::Writer w;
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.rank()));
    for (std::size_t d : p.shape()) w.u64(d);
    w.u64(p.numel());
    write_values(w, p.data());
  }
  return w;
}

Checkpoint read_body(io::Reader& r) {
  Checkpoint c;
  c.descriptor = r.descriptor();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    const std::uint64_t length = r.u64();
    if (length != shape_numel(shape)) {
      throw io::BadMagicError("checkpoint tensor " + std::to_string(i) + " length disagrees with its shape");
    }
    std::vector<float> values(length);
    r.f32_array(values.data(), values.size());
    c.shapes.push_back(std::move(shape));
    c.values.push_back(std::move(values));
  }
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::string& descriptor, std::span<const Tensor> params) {
  return write_body(params).frame(io::FileKind::Checkpoint, descriptor);
}

Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& label) {
  io::Reader r(std::move(bytes), io::FileKind::Checkpoint, label);
  return read_body(r);
}

void save_checkpoint(const std::filesystem::path& path, const std::string& descriptor,
                     std::span<const Tensor> params) {
  write_body(params).save(path, io::FileKind::Checkpoint, descriptor);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto r = io::Reader::open(path, io::FileKind::Checkpoint);
  return read_body(r);
}

void restore_parameters(const Checkpoint& checkpoint, std::span<Tensor> params) {
  if (checkpoint.values.size() != params.size()) {
    throw DimensionError("checkpoint holds " + std::to_string(checkpoint.values.size()) + " tensors, model has " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (checkpoint.shapes[i] != params[i].shape()) {
      throw DimensionError("checkpoint tensor " + std::to_string(i) + " is " + shape_string(checkpoint.shapes[i]) +
                           ", model expects " + shape_string(params[i].shape()));
    }
    auto dst = params[i].data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<Real>(checkpoint.values[i][j]);
  }
}

}  // namespace plls::inline PLLS_ABI::nn

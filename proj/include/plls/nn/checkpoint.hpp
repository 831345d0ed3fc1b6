#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "plls/io.hpp"
#include "plls/tensor/tensor.hpp"

namespace plls::inline PLLS_ABI::nn {

// Model checkpoint: the shared PLLS container (kind = checkpoint) whose
// descriptor is the architecture text, followed by u32 tensor count and per
// tensor: u32 rank, u64 dims, u64 length, length x f32, in declaration order.
struct Checkpoint {
  std::string descriptor;
  std::vector<Shape> shapes;
  std::vector<std::vector<float>> values;
};

std::vector<std::uint8_t> encode_checkpoint(const std::string& descriptor, std::span<const Tensor> params);
Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& label = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const std::string& descriptor,
                     std::span<const Tensor> params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `params`; count and shapes must match.
void restore_parameters(const Checkpoint& checkpoint, std::span<Tensor> params);

}  // namespace plls::inline PLLS_ABI::nn

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "skipformer/numerics/array.hpp"

namespace skf::num {

// Binary layout, all integers and values little-endian:
//   "SKPF"  u32 version  u32 tensor_count
//   per tensor: u32 name_len, name bytes (UTF-8), u32 rank, rank x u64 dims,
//               prod(dims) x f64 values
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Array value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace skf::num

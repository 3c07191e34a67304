#include "skipformer/numerics/checkpoint.hpp"

#include "../byte_io.hpp"

namespace skf::num {

namespace {
constexpr std::string_view kMagic = "SKPF";
}

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) w.u64(d);
    for (double v : t.value.values()) w.f64(v);
  }
  return std::move(w.buffer());
}

std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kMagic, "checkpoint");
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  const std::uint32_t count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str("tensor name");
    const std::uint32_t rank = r.u32("rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64("dimension");
    const std::size_t n = shape_size(shape);
    r.need(static_cast<std::uint64_t>(n) * 8, "tensor values");
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64("tensor value");
    t.value = Array(std::move(shape), std::move(data));
    out.push_back(std::move(t));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after last tensor", r.offset());
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  detail::write_file(path, encode_checkpoint(tensors));
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace skf::num

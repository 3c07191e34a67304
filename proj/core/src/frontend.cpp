#include "skipformer/frontend.hpp"

#include <cmath>

#include "byte_io.hpp"
#include "skipformer/errors.hpp"

namespace skf::frontend {

using num::Array;
using num::Shape;
using num::Var;

namespace {
constexpr std::size_t kKernel = 3;
constexpr std::size_t kStride = 2;
constexpr std::string_view kMagic = "SKPF-FEAT";

std::size_t conv_out(std::size_t n) { return (n - kKernel) / kStride + 1; }
}  // namespace

std::size_t subsampled_length(std::size_t t_in) {
  if (t_in < kMinInputFrames) throw InputTooShortError(t_in, kMinInputFrames);
  return ((t_in - 1) / 2 - 1) / 2;
}

FrontendParams::FrontendParams(std::size_t feature_dim_, std::size_t d_model_,
                               std::mt19937_64& rng)
    : feature_dim(feature_dim_), d_model(d_model_) {
  if (feature_dim < kMinInputFrames) {
    throw ParameterError("feature dimension " + std::to_string(feature_dim) +
                         " below subsampler minimum " + std::to_string(kMinInputFrames));
  }
  const std::size_t patch1 = kKernel * kKernel;
  const std::size_t patch2 = kKernel * kKernel * d_model;
  conv1_weight = num::Parameter(
      random_normal(Shape{patch1, d_model}, 1.0 / std::sqrt(static_cast<double>(patch1)), rng));
  conv1_bias = num::Parameter(Array(Shape{d_model}, 0.0));
  conv2_weight = num::Parameter(
      random_normal(Shape{patch2, d_model}, 1.0 / std::sqrt(static_cast<double>(patch2)), rng));
  conv2_bias = num::Parameter(Array(Shape{d_model}, 0.0));
  const std::size_t freq = conv_out(conv_out(feature_dim));
  projection = Linear(freq * d_model, d_model, rng);
}

void FrontendParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".conv1.weight", &conv1_weight});
  out.push_back({prefix + ".conv1.bias", &conv1_bias});
  out.push_back({prefix + ".conv2.weight", &conv2_weight});
  out.push_back({prefix + ".conv2.bias", &conv2_bias});
  projection.collect(out, prefix + ".projection");
}

SubsampledSequence subsample(const FeatureSequence& x, const FrontendParams& p) {
  const std::size_t t_in = x.length();
  const std::size_t t = subsampled_length(t_in);
  if (x.feature_dim() != p.feature_dim) {
    throw DimensionError("feature dimension " + std::to_string(x.feature_dim()) +
                         " does not match frontend " + std::to_string(p.feature_dim));
  }
  const Var image(x.frames.reshaped(Shape{t_in, x.feature_dim(), 1}));
  const Var c1 = num::swish(num::conv2d(image, p.conv1_weight.value, p.conv1_bias.value,
                                        kKernel, kStride));
  const Var c2 =
      num::swish(num::conv2d(c1, p.conv2_weight.value, p.conv2_bias.value, kKernel, kStride));
  const std::size_t freq = c2.shape()[1];
  const Var flat = num::reshape(c2, Shape{t, freq * p.d_model});

  SubsampledSequence out;
  out.frames = p.projection(flat);
  out.time_map.resize(t);
  for (std::size_t i = 0; i < t; ++i) out.time_map[i] = 4 * i;
  return out;
}

std::vector<std::uint8_t> encode_features(const std::vector<FeatureSequence>& seqs) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kFeatureFileVersion);
  w.u32(static_cast<std::uint32_t>(seqs.size()));
  for (const auto& s : seqs) {
    w.str(s.utterance_id);
    w.u32(static_cast<std::uint32_t>(s.length()));
    w.u32(static_cast<std::uint32_t>(s.feature_dim()));
    for (double v : s.frames.values()) w.f32(static_cast<float>(v));
  }
  return std::move(w.buffer());
}

std::vector<FeatureSequence> decode_features(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kMagic, "feature file");
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureFileVersion) {
    throw FormatError("unsupported feature file version " + std::to_string(version), version_at);
  }
  const std::uint32_t count = r.u32("utterance count");
  std::vector<FeatureSequence> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureSequence s;
    s.utterance_id = r.str("utterance id");
    const std::uint64_t dims_at = r.offset();
    const std::uint32_t t_in = r.u32("T_in");
    const std::uint32_t f = r.u32("F");
    if (t_in == 0 || f == 0) {
      throw FormatError("utterance '" + s.utterance_id + "' has an empty shape", dims_at);
    }
    const std::uint64_t n = static_cast<std::uint64_t>(t_in) * f;
    r.need(n * 4, "feature values");
    std::vector<double> data(n);
    for (auto& v : data) {
      const std::uint64_t at = r.offset();
      v = static_cast<double>(r.f32("feature value"));
      if (!std::isfinite(v)) throw FormatError("non-finite feature value", at);
    }
    s.frames = Array(Shape{t_in, f}, std::move(data));
    out.push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after last utterance", r.offset());
  return out;
}

void save_features(const std::filesystem::path& path, const std::vector<FeatureSequence>& seqs) {
  detail::write_file(path, encode_features(seqs));
}

std::vector<FeatureSequence> load_features(const std::filesystem::path& path) {
  return decode_features(detail::read_file(path));
}

}  // namespace skf::frontend

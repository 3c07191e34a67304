#include "skipformer/layers.hpp"

#include <cmath>

#include "skipformer/errors.hpp"

namespace skf {

using num::Array;
using num::Shape;
using num::Var;

Array random_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Array a(std::move(shape));
  for (double& v : a.values()) v = dist(rng);
  return a;
}

Array sinusoidal_encoding(std::size_t length, std::size_t dim) {
  Array pe(Shape{length, dim});
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      pe(pos, i) = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < dim) pe(pos, i + 1) = std::cos(static_cast<double>(pos) * freq);
    }
  }
  return pe;
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight(random_normal(Shape{in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
      bias(Array(Shape{out}, 0.0)) {}

Var Linear::operator()(const Var& x) const {
  return num::add_bias(num::matmul(x, weight.value), bias.value);
}

void Linear::zero_out() {
  weight.value.mutable_value().fill(0.0);
  bias.value.mutable_value().fill(0.0);
}

void Linear::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

LayerNorm::LayerNorm(std::size_t dim)
    : gain(Array(Shape{dim}, 1.0)), bias(Array(Shape{dim}, 0.0)) {}

Var LayerNorm::operator()(const Var& x) const {
  return num::layer_norm(x, gain.value, bias.value, kEps);
}

void LayerNorm::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".bias", &bias});
}

MultiHeadAttention::MultiHeadAttention(std::size_t dim, std::size_t heads_, std::mt19937_64& rng)
    : query(dim, dim, rng),
      key(dim, dim, rng),
      value(dim, dim, rng),
      output(dim, dim, rng),
      heads(heads_) {
  if (heads == 0 || dim % heads != 0) {
    throw ParameterError("attention dimension " + std::to_string(dim) +
                         " not divisible by head count " + std::to_string(heads));
  }
}

Var MultiHeadAttention::operator()(const Var& queries, const Var& memory,
                                   const AttentionCall& call) const {
  const std::size_t dim = queries.cols();
  const std::size_t dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Var q = query(queries);
  const Var k = key(memory);
  const Var v = value(memory);
  std::vector<Var> contexts;
  contexts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Var qh = heads == 1 ? q : num::slice_cols(q, h * dh, dh);
    const Var kh = heads == 1 ? k : num::slice_cols(k, h * dh, dh);
    const Var vh = heads == 1 ? v : num::slice_cols(v, h * dh, dh);
    const Var scores = num::scale(num::matmul(qh, num::transpose(kh)), inv_sqrt);
    if (call.counter) {
      call.counter->score_macs += static_cast<std::uint64_t>(queries.rows()) * memory.rows() * dh;
    }
    const Var probs = num::softmax_rows_masked(scores, call.mask);
    if (call.probabilities) call.probabilities->push_back(probs.value());
    contexts.push_back(num::matmul(probs, vh));
  }
  const Var ctx = heads == 1 ? contexts.front() : num::concat_cols(contexts);
  return output(ctx);
}

void MultiHeadAttention::collect(ParamList& out, const std::string& prefix) {
  query.collect(out, prefix + ".query");
  key.collect(out, prefix + ".key");
  value.collect(out, prefix + ".value");
  output.collect(out, prefix + ".output");
}

}  // namespace skf

#pragma once

// Parameterised building blocks shared by the encoder and the decoder.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "skipformer/numerics/ops.hpp"
#include "skipformer/numerics/optim.hpp"

namespace skf {

struct NamedParam {
  std::string name;
  num::Parameter* param;
};
using ParamList = std::vector<NamedParam>;

num::Array random_normal(num::Shape shape, double stddev, std::mt19937_64& rng);

// (length, dim) absolute sinusoidal position table.
num::Array sinusoidal_encoding(std::size_t length, std::size_t dim);

struct Linear {
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng);

  num::Parameter weight;  // (in, out)
  num::Parameter bias;    // (out)

  num::Var operator()(const num::Var& x) const;
  void zero_out();
  void collect(ParamList& out, const std::string& prefix);
};

struct LayerNorm {
  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);

  num::Parameter gain;
  num::Parameter bias;

  static constexpr double kEps = 1e-5;
  num::Var operator()(const num::Var& x) const;
  void collect(ParamList& out, const std::string& prefix);
};

// Counts multiply-accumulates spent on attention score matrices (Q K^T).
struct AttentionCounter {
  std::uint64_t score_macs = 0;
};

struct AttentionCall {
  num::AttentionMask mask;
  AttentionCounter* counter = nullptr;
  // When set, receives one (Lq, Lk) probability matrix per head.
  std::vector<num::Array>* probabilities = nullptr;
};

struct MultiHeadAttention {
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t dim, std::size_t heads, std::mt19937_64& rng);

  Linear query;
  Linear key;
  Linear value;
  Linear output;
  std::size_t heads = 1;

  num::Var operator()(const num::Var& queries, const num::Var& memory,
                      const AttentionCall& call = {}) const;
  void collect(ParamList& out, const std::string& prefix);
};

}  // namespace skf

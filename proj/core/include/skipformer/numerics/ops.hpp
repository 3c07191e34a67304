#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "skipformer/numerics/autograd.hpp"

namespace skf::num {

// Log of an impossible event. Finite so that every op stays in the finite
// domain; exp(kLogZero - x) underflows to exactly 0 for any reachable x.
inline constexpr double kLogZero = -1e30;

// --- linear algebra ---
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// --- elementwise ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a is (n, m), bias is (m): adds bias to every row.
Var add_bias(const Var& a, const Var& bias);
Var sigmoid(const Var& a);
Var swish(const Var& a);
// (n, 2d) -> (n, d): first half gated by sigmoid of the second half.
Var glu(const Var& a);
// Inverted dropout. rate == 0 returns a unchanged.
Var dropout(const Var& a, double rate, std::mt19937_64& rng);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// --- reductions ---
Var sum(const Var& a);
Var mean(const Var& a);

// --- normalisation ---
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);

struct AttentionMask {
  // Keys at column >= key_length get zero weight.
  std::size_t key_length = SIZE_MAX;
  // Query row i only sees keys j <= i.
  bool causal = false;
};
// Row softmax over the unmasked columns; masked entries are exactly 0.
Var softmax_rows_masked(const Var& a, const AttentionMask& mask);

// Normalises over the last dimension of a (n, d) array.
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps);

// --- convolution ---
// x is (L, D), w is (K, D) with K odd, bias is (D). Zero "same" padding;
// rows at index >= valid_length are treated as zeros and produce zeros.
Var depthwise_conv1d(const Var& x, const Var& w, const Var& bias,
                     std::size_t valid_length = SIZE_MAX);

// Channels-last 2-D convolution, no padding.
// x is (H, W, Cin); w is (k*k*Cin, Cout) ordered (ky, kx, cin); bias is (Cout).
// Output is (H', W', Cout) with H' = (H - k) / stride + 1.
Var conv2d(const Var& x, const Var& w, const Var& bias, std::size_t kernel,
           std::size_t stride);

// --- structural ---
Var reshape(const Var& a, Shape shape);
Var slice_cols(const Var& a, std::size_t start, std::size_t width);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
// Row gather; indices may repeat. Also serves as embedding lookup.
Var gather_rows(const Var& a, std::span<const std::size_t> indices);
// Flat element gather into a rank-1 result.
Var gather_elems(const Var& a, std::span<const std::size_t> flat_indices);
// out[i] = log(sum_{j in groups[i]} exp(a[j])) over flat indices of a.
// An empty group yields kLogZero.
Var logsumexp_groups(const Var& a, const std::vector<std::vector<std::size_t>>& groups);

// Mean over rows of -log_softmax(logits)[row, targets[row]].
Var cross_entropy(const Var& logits, std::span<const std::size_t> targets);

}  // namespace skf::num

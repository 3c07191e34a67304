#pragma once

#include <cstdint>

#include "skipformer/numerics/autograd.hpp"

namespace skf::num {

// Trainable tensor plus Adam state.
struct Parameter {
  Parameter() = default;
  explicit Parameter(Array init);

  // Copies are deep: the copy owns a fresh leaf and never aliases gradients.
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  Var value;  // leaf with requires_grad set
  Array moment1;
  Array moment2;
  std::uint64_t step_count = 0;

  const Shape& shape() const { return value.shape(); }
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

// Bias-corrected Adam update. Rejects a non-finite gradient before touching
// any state.
void adam_step(Parameter& p, const Array& grad, double lr, double beta1, double beta2,
               double eps);

inline void adam_step(Parameter& p, const Array& grad, const AdamHyper& h) {
  adam_step(p, grad, h.lr, h.beta1, h.beta2, h.eps);
}

}  // namespace skf::num

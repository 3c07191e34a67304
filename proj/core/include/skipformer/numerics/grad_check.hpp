#pragma once

#include <functional>
#include <vector>

#include "skipformer/numerics/autograd.hpp"

namespace skf::num {

struct GradCheckOptions {
  double h = 1e-5;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients of f against central differences
// (f(x+h) - f(x-h)) / 2h for every coordinate of every leaf. Leaves are
// perturbed in place and restored. f must return a single element.
GradCheckReport grad_check_leaves(const std::function<Var()>& f, const std::vector<Var>& leaves,
                                  const GradCheckOptions& opts = {});

// Array-input form: f receives fresh differentiable leaves built from inputs.
double grad_check(const std::function<Var(const std::vector<Var>&)>& f,
                  const std::vector<Array>& inputs, double h = 1e-5);

}  // namespace skf::num

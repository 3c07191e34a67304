#include "skipformer/numerics/optim.hpp"

#include <cmath>
#include <string>

#include "skipformer/errors.hpp"

namespace skf::num {

Parameter::Parameter(Array init)
    : value(init, true), moment1(init.shape(), 0.0), moment2(init.shape(), 0.0) {}

Parameter::Parameter(const Parameter& other)
    : value(other.value ? Var(other.value.value(), true) : Var()),
      moment1(other.moment1),
      moment2(other.moment2),
      step_count(other.step_count) {}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) *this = Parameter(other);
  return *this;
}

void adam_step(Parameter& p, const Array& grad, double lr, double beta1, double beta2,
               double eps) {
  if (grad.shape() != p.shape()) {
    throw DimensionError("adam_step: gradient " + shape_string(grad.shape()) +
                         " vs parameter " + shape_string(p.shape()));
  }
  if (!(lr > 0.0)) throw ParameterError("adam_step: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("adam_step: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ParameterError("adam_step: eps must be positive");
  if (!grad.all_finite()) throw NumericError("adam_step: non-finite gradient");

  const std::uint64_t t = p.step_count + 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  Array& w = p.value.mutable_value();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    p.moment1[i] = beta1 * p.moment1[i] + (1.0 - beta1) * g;
    p.moment2[i] = beta2 * p.moment2[i] + (1.0 - beta2) * g * g;
    const double mhat = p.moment1[i] / c1;
    const double vhat = p.moment2[i] / c2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  p.step_count = t;
}

}  // namespace skf::num

#include "skipformer/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "skipformer/errors.hpp"

namespace skf::num {

namespace {

double eval_scalar(const std::function<Var()>& f) {
  const Var out = f();
  if (out.value().size() != 1) {
    throw ContractError("grad_check: function returned shape " + shape_string(out.shape()) +
                        ", expected a scalar");
  }
  return out.item();
}

}  // namespace

GradCheckReport grad_check_leaves(const std::function<Var()>& f, const std::vector<Var>& leaves,
                                  const GradCheckOptions& opts) {
  if (!(opts.h > 0.0 && opts.h <= 1e-2)) {
    throw ParameterError("grad_check: h must lie in (0, 1e-2]");
  }
  for (const Var& leaf : leaves) {
    if (!leaf.requires_grad()) throw ContractError("grad_check: leaf does not require grad");
  }

  std::vector<Array> saved_grads;
  saved_grads.reserve(leaves.size());
  for (const Var& leaf : leaves) {
    saved_grads.push_back(leaf.grad());
    const_cast<Var&>(leaf).zero_grad();
  }

  {
    Tape tape;
    TapeScope scope(tape);
    const Var out = f();
    if (out.value().size() != 1) {
      throw ContractError("grad_check: function returned shape " + shape_string(out.shape()) +
                          ", expected a scalar");
    }
    tape.backward(out);
  }

  GradCheckReport report;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Var leaf = leaves[li];
    const Array analytic = leaf.has_grad() ? leaf.grad() : Array(leaf.shape(), 0.0);
    Array& x = leaf.mutable_value();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + opts.h;
      const double fp = eval_scalar(f);
      x[i] = orig - opts.h;
      const double fm = eval_scalar(f);
      x[i] = orig;
      const double numeric = (fp - fm) / (2.0 * opts.h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_leaf = li;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    leaves[li].node()->grad = std::move(saved_grads[li]);
  }
  return report;
}

double grad_check(const std::function<Var(const std::vector<Var>&)>& f,
                  const std::vector<Array>& inputs, double h) {
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Array& a : inputs) leaves.emplace_back(a, true);
  GradCheckOptions opts;
  opts.h = h;
  return grad_check_leaves([&] { return f(leaves); }, leaves, opts).max_rel_error;
}

}  // namespace skf::num

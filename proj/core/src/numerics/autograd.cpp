#include "skipformer/numerics/autograd.hpp"

#include "skipformer/errors.hpp"

namespace skf::num {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Array& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Array(value.shape(), 0.0);
  if (grad.shape() != value.shape()) grad = Array(value.shape(), 0.0);
  return grad;
}

Var::Var(Array value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tape* active_tape() noexcept { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::backward(const Var& root) {
  if (!root) throw ContractError("backward on an empty Var");
  if (root.value().size() != 1) {
    throw ContractError("backward root must be scalar, got shape " +
                        shape_string(root.shape()));
  }
  if (!root.requires_grad()) {
    nodes_.clear();
    return;
  }
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n.grad);
  }
  // Intermediate grads are dead once the graph is released; leaves keep theirs.
  nodes_.clear();
}

namespace {

bool tracking(std::initializer_list<const Var*> inputs) {
  if (!g_active_tape) return false;
  for (const Var* v : inputs) {
    if (v->requires_grad()) return true;
  }
  return false;
}

bool tracking(const std::vector<Var>& inputs) {
  if (!g_active_tape) return false;
  for (const Var& v : inputs) {
    if (v.requires_grad()) return true;
  }
  return false;
}

Var finish(Array value, bool track, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced, shape " + shape_string(value.shape()));
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (track) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    g_active_tape->record(node);
  }
  return Var(std::move(node));
}

}  // namespace

Var make_op_result(Array value, std::initializer_list<const Var*> inputs,
                   BackwardFn backward) {
  return finish(std::move(value), tracking(inputs), std::move(backward));
}

Var make_op_result(Array value, const std::vector<Var>& inputs, BackwardFn backward) {
  return finish(std::move(value), tracking(inputs), std::move(backward));
}

Array* grad_target(const Var& input) {
  if (!input.requires_grad()) return nullptr;
  return &input.node()->grad_buffer();
}

void accumulate_grad(const Var& input, const Array& g) {
  Array* target = grad_target(input);
  if (!target) return;
  if (target->size() != g.size()) {
    throw DimensionError("gradient shape " + shape_string(g.shape()) +
                         " does not match value shape " + shape_string(input.shape()));
  }
  double* t = target->data();
  const double* s = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) t[i] += s[i];
}

}  // namespace skf::num

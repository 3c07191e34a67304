#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "skipformer/numerics/array.hpp"

namespace skf::num {

struct Node;

// Receives the gradient of the node's output and pushes it into its inputs.
using BackwardFn = std::function<void(const Array& out_grad)>;

struct Node {
  Array value;
  Array grad;  // empty until something is accumulated into it
  bool requires_grad = false;
  BackwardFn backward;

  // Lazily allocates the gradient buffer with the value's shape.
  Array& grad_buffer();
};

// Shared handle to a value in the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(Array value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Array& value() const { return node_->value; }
  Array& mutable_value() { return node_->value; }
  const Array& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Array(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const { return node_->value.item(); }

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Records op outputs in creation order; backward() replays them in reverse.
// Ops record only while a tape is active on the calling thread (TapeScope)
// and at least one input requires a gradient. Without an active tape every
// op is a plain forward computation.
class Tape {
 public:
  void record(std::shared_ptr<Node> node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const noexcept { return nodes_.size(); }

  // root must be a single element. Seeds d(root)=1, runs every recorded
  // backward closure, then releases the recorded graph.
  void backward(const Var& root);
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

Tape* active_tape() noexcept;

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Builds an op output. backward is attached and the node recorded only when
// gradients are being tracked for one of the inputs. Throws NumericError on
// non-finite output values.
Var make_op_result(Array value, std::initializer_list<const Var*> inputs,
                   BackwardFn backward);
Var make_op_result(Array value, const std::vector<Var>& inputs, BackwardFn backward);

// Adds g into the input's gradient when it participates in differentiation.
void accumulate_grad(const Var& input, const Array& g);

// Gradient buffer of input, or nullptr when input is not differentiated.
Array* grad_target(const Var& input);

}  // namespace skf::num

#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssad/tensor.hpp"

namespace ssad {

/// A named differentiable parameter. Gradients accumulate into `grad` across
/// every tape that references it until zero_grad() is called.
struct Parameter {
  Parameter(std::string name, Tensor value, bool trainable = true);

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

using ParameterPtr = std::shared_ptr<Parameter>;
using ParameterList = std::vector<ParameterPtr>;

ParameterPtr make_parameter(std::string name, Tensor value, bool trainable = true);
void zero_grads(const ParameterList& params);
/// Concatenates lists and rejects duplicate names.
ParameterList merge_parameters(std::initializer_list<ParameterList> lists);

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const noexcept { return id >= 0; }
};

/// Reverse-mode recorder. One tape per forward pass; values live until the
/// tape is destroyed. Not thread-safe; use one tape per thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var constant(Tensor value);
  /// Leaf that accumulates a gradient readable through grad(); used for
  /// input-gradient checks.
  Var input(Tensor value);
  /// Leaf bound to a parameter; each parameter maps to one leaf per tape.
  Var parameter(const ParameterPtr& p);

  /// Records an op result. `fn` runs during backward() only when the result
  /// requires a gradient; it reads grad(self) and accumulates into its
  /// inputs through grad_buffer().
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  /// Gradient of the last backward() target with respect to v (empty if v
  /// received none).
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  Tensor& grad_buffer(Var v);

  /// Backpropagates from a single-element value, scaled by `seed`, and
  /// accumulates leaf gradients into bound parameters.
  void backward(Var target, double seed = 1.0);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  bool grad_enabled_;
  // A deque keeps value references valid while later nodes are appended.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

}  // namespace ssad

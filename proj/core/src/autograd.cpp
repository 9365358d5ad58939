#include "ssad/autograd.hpp"

#include <set>

namespace ssad {

Parameter::Parameter(std::string n, Tensor v, bool t)
    : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0), trainable(t) {}

ParameterPtr make_parameter(std::string name, Tensor value, bool trainable) {
  return std::make_shared<Parameter>(std::move(name), std::move(value), trainable);
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) p->zero_grad();
}

ParameterList merge_parameters(std::initializer_list<ParameterList> lists) {
  ParameterList out;
  std::set<std::string> seen;
  for (const auto& list : lists) {
    for (const auto& p : list) {
      if (!seen.insert(p->name).second) throw Error("duplicate parameter name: " + p->name);
      out.push_back(p);
    }
  }
  return out;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, grad_enabled_, {}, nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(const ParameterPtr& p) {
  if (auto it = param_nodes_.find(p.get()); it != param_nodes_.end()) return Var{it->second};
  const bool rg = grad_enabled_ && p->trainable;
  // Frozen parameters are copied as constants so no gradient ever reaches them.
  nodes_.push_back(Node{p->value, {}, rg, {}, rg ? p.get() : nullptr});
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(p.get(), id);
  return Var{id};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool rg = false;
  if (grad_enabled_) {
    for (Var in : inputs) rg = rg || (in.valid() && nodes_.at(in.id).requires_grad);
  }
  nodes_.push_back(Node{std::move(value), {}, rg, rg ? std::move(fn) : BackwardFn{}, nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var target, double seed) {
  if (nodes_.at(target.id).value.size() != 1) {
    throw Error("backward() target must hold a single element");
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[target.id].requires_grad) return;
  grad_buffer(target)[0] = seed;
  for (int i = target.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, Var{i});
    } else if (n.param != nullptr) {
      auto dst = n.param->grad.values();
      auto src = nodes_[i].grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

}  // namespace ssad

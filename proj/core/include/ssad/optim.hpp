#pragma once

#include <string>
#include <vector>

#include "ssad/autograd.hpp"
#include "ssad/nn.hpp"

namespace ssad {

/// Learning rate at a 1-based epoch: base * factor^(number of drops <= epoch).
double scheduled_lr(double base, const std::vector<int>& drop_epochs, double factor, int epoch);

class Optimizer {
 public:
  explicit Optimizer(ParameterList params) : params_(std::move(params)) {}
  virtual ~Optimizer() = default;

  const ParameterList& parameters() const noexcept { return params_; }
  void zero_grad() const { zero_grads(params_); }
  /// Applies one update from the accumulated gradients at learning rate `lr`.
  virtual void step(double lr) = 0;

  /// Optimizer state under `prefix`, stored beside the parameters.
  virtual void save_state(nn::Archive& archive, const std::string& prefix) const = 0;
  virtual void load_state(const nn::Archive& archive, const std::string& prefix) = 0;

 protected:
  ParameterList params_;
};

/// Adam with decoupled weight decay.
class AdamW final : public Optimizer {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
  };

  AdamW(ParameterList params, Options options);
  void step(double lr) override;
  void save_state(nn::Archive& archive, const std::string& prefix) const override;
  void load_state(const nn::Archive& archive, const std::string& prefix) override;
  long steps() const noexcept { return t_; }

 private:
  Options o_;
  long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// SGD with heavy-ball momentum.
class Sgd final : public Optimizer {
 public:
  struct Options {
    double momentum = 0.9;
    double weight_decay = 0.0;
  };

  Sgd(ParameterList params, Options options);
  void step(double lr) override;
  void save_state(nn::Archive& archive, const std::string& prefix) const override;
  void load_state(const nn::Archive& archive, const std::string& prefix) override;

 private:
  Options o_;
  bool started_ = false;
  std::vector<Tensor> buf_;
};

}  // namespace ssad

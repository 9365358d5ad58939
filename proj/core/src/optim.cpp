#include "ssad/optim.hpp"

#include <cmath>

namespace ssad {

double scheduled_lr(double base, const std::vector<int>& drop_epochs, double factor, int epoch) {
  int drops = 0;
  for (int d : drop_epochs) drops += d <= epoch ? 1 : 0;
  return base * std::pow(factor, drops);
}

AdamW::AdamW(ParameterList params, Options options) : Optimizer(std::move(params)), o_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p->value.shape(), 0.0);
    v_.emplace_back(p->value.shape(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(o_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(o_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (!p.trainable) continue;
    auto w = p.value.values();
    auto g = p.grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] -= lr * o_.weight_decay * w[k];
      m[k] = o_.beta1 * m[k] + (1.0 - o_.beta1) * g[k];
      v[k] = o_.beta2 * v[k] + (1.0 - o_.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + o_.eps);
    }
  }
}

void AdamW::save_state(nn::Archive& archive, const std::string& prefix) const {
  archive.metadata["optimizers"][prefix] = {{"type", "adamw"}, {"steps", t_}};
  for (std::size_t i = 0; i < params_.size(); ++i) {
    archive.tensors[prefix + ".m/" + params_[i]->name] = m_[i];
    archive.tensors[prefix + ".v/" + params_[i]->name] = v_[i];
  }
}

void AdamW::load_state(const nn::Archive& archive, const std::string& prefix) {
  const auto& meta = archive.metadata.at("optimizers").at(prefix);
  if (meta.at("type") != "adamw") throw Error("optimizer state '" + prefix + "' is not AdamW");
  t_ = meta.at("steps").get<long>();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto [suffix, dst] : {std::pair{".m/", &m_[i]}, std::pair{".v/", &v_[i]}}) {
      auto it = archive.tensors.find(prefix + suffix + params_[i]->name);
      if (it == archive.tensors.end() || !it->second.same_shape(*dst)) {
        throw Error("optimizer state missing or mismatched for " + params_[i]->name);
      }
      *dst = it->second;
    }
  }
}

Sgd::Sgd(ParameterList params, Options options) : Optimizer(std::move(params)), o_(options) {
  for (const auto& p : params_) buf_.emplace_back(p->value.shape(), 0.0);
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (!p.trainable) continue;
    auto w = p.value.values();
    auto g = p.grad.values();
    auto b = buf_[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double d = g[k] + o_.weight_decay * w[k];
      b[k] = started_ ? o_.momentum * b[k] + d : d;
      w[k] -= lr * b[k];
    }
  }
  started_ = true;
}

void Sgd::save_state(nn::Archive& archive, const std::string& prefix) const {
  archive.metadata["optimizers"][prefix] = {{"type", "sgd"}, {"started", started_}};
  for (std::size_t i = 0; i < params_.size(); ++i) archive.tensors[prefix + ".buf/" + params_[i]->name] = buf_[i];
}

void Sgd::load_state(const nn::Archive& archive, const std::string& prefix) {
  const auto& meta = archive.metadata.at("optimizers").at(prefix);
  if (meta.at("type") != "sgd") throw Error("optimizer state '" + prefix + "' is not SGD");
  started_ = meta.at("started").get<bool>();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = archive.tensors.find(prefix + ".buf/" + params_[i]->name);
    if (it == archive.tensors.end() || !it->second.same_shape(buf_[i])) {
      throw Error("optimizer state missing or mismatched for " + params_[i]->name);
    }
    buf_[i] = it->second;
  }
}

}  // namespace ssad

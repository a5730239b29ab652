#include "fusionlung/optim.hpp"

#include <cmath>

#include "fusionlung/errors.hpp"

namespace fusionlung {

Optimizer::Optimizer(std::vector<torch::Tensor> params, double lr)
    : params_(std::move(params)), lr_(lr) {}

void Optimizer::zero_grad() {
  for (auto& p : params_) {
    if (p.mutable_grad().defined()) {
      p.mutable_grad().zero_();
    }
  }
}

torch::Tensor Optimizer::slot(size_t i, const std::string& name,
                              std::map<std::string, torch::Tensor>& storage) {
  std::string key = "p" + std::to_string(i) + "." + name;
  auto it = storage.find(key);
  if (it == storage.end()) {
    it = storage.emplace(key, torch::zeros_like(params_[i])).first;
  }
  return it->second;
}

std::map<std::string, torch::Tensor> Optimizer::state() const {
  auto out = slots_;
  out.emplace("steps", torch::tensor(steps_, torch::kInt64));
  return out;
}

void Optimizer::load_state(const std::map<std::string, torch::Tensor>& tensors) {
  slots_.clear();
  for (const auto& [name, tensor] : tensors) {
    if (name == "steps") {
      steps_ = tensor.item<int64_t>();
    } else {
      slots_[name] = tensor.clone();
    }
  }
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
constexpr double kRmsAlpha = 0.99;

class Sgd final : public Optimizer {
 public:
  using Optimizer::Optimizer;
  OptimizerKind kind() const override { return OptimizerKind::sgd; }

  void step() override {
    torch::NoGradGuard guard;
    ++steps_;
    for (auto& p : params_) {
      if (!p.grad().defined()) continue;
      p.add_(p.grad(), -lr_);
    }
  }
};

class Adam final : public Optimizer {
 public:
  using Optimizer::Optimizer;
  OptimizerKind kind() const override { return OptimizerKind::adam; }

  void step() override {
    torch::NoGradGuard guard;
    ++steps_;
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.grad().defined()) continue;
      auto g = p.grad();
      auto m = slot(i, "m", slots_);
      auto v = slot(i, "v", slots_);
      m.mul_(kBeta1).add_(g, 1.0 - kBeta1);
      v.mul_(kBeta2).addcmul_(g, g, 1.0 - kBeta2);
      auto denom = (v.sqrt() / std::sqrt(bias2)).add_(kEps);
      p.addcdiv_(m, denom, -lr_ / bias1);
    }
  }
};

class Adamax final : public Optimizer {
 public:
  using Optimizer::Optimizer;
  OptimizerKind kind() const override { return OptimizerKind::adamax; }

  void step() override {
    torch::NoGradGuard guard;
    ++steps_;
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.grad().defined()) continue;
      auto g = p.grad();
      auto m = slot(i, "m", slots_);
      auto u = slot(i, "u", slots_);
      m.mul_(kBeta1).add_(g, 1.0 - kBeta1);
      torch::max_out(u, u * kBeta2, g.abs().add_(kEps));
      p.addcdiv_(m, u, -lr_ / bias1);
    }
  }
};

class RmsProp final : public Optimizer {
 public:
  using Optimizer::Optimizer;
  OptimizerKind kind() const override { return OptimizerKind::rmsprop; }

  void step() override {
    torch::NoGradGuard guard;
    ++steps_;
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.grad().defined()) continue;
      auto g = p.grad();
      auto sq = slot(i, "sq", slots_);
      sq.mul_(kRmsAlpha).addcmul_(g, g, 1.0 - kRmsAlpha);
      p.addcdiv_(g, sq.sqrt().add_(kEps), -lr_);
    }
  }
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::vector<torch::Tensor> params,
                                          double lr) {
  switch (kind) {
    case OptimizerKind::adam:
      return std::make_unique<Adam>(std::move(params), lr);
    case OptimizerKind::adamax:
      return std::make_unique<Adamax>(std::move(params), lr);
    case OptimizerKind::rmsprop:
      return std::make_unique<RmsProp>(std::move(params), lr);
    case OptimizerKind::sgd:
      return std::make_unique<Sgd>(std::move(params), lr);
  }
  throw ConfigError("unknown optimizer kind");
}

}  // namespace fusionlung

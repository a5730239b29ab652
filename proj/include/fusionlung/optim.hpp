#pragma once

#include <torch/torch.h>

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fusionlung/config.hpp"

namespace fusionlung {

/// Minimal first-order optimizers with uniform, checkpointable state.
/// (The libtorch C++ frontend ships no Adamax, so all four update rules
/// live here and serialize the same way: one named tensor per state slot.)
class Optimizer {
 public:
  Optimizer(std::vector<torch::Tensor> params, double lr);
  virtual ~Optimizer() = default;

  void zero_grad();
  virtual void step() = 0;
  virtual OptimizerKind kind() const = 0;

  /// State snapshot as named tensors ("p<i>.<slot>" plus "steps").
  virtual std::map<std::string, torch::Tensor> state() const;
  virtual void load_state(const std::map<std::string, torch::Tensor>& tensors);

  double learning_rate() const { return lr_; }

 protected:
  torch::Tensor slot(size_t i, const std::string& name,
                     std::map<std::string, torch::Tensor>& storage);

  std::vector<torch::Tensor> params_;
  double lr_;
  int64_t steps_ = 0;
  std::map<std::string, torch::Tensor> slots_;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::vector<torch::Tensor> params,
                                          double lr);

}  // namespace fusionlung

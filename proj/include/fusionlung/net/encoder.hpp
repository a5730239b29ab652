#pragma once

#include <torch/torch.h>

#include <array>
#include <string>

#include "fusionlung/errors.hpp"

namespace fusionlung {

struct BackboneConfig {
  enum class Variant { resnet50, tiny };

  Variant variant = Variant::resnet50;
  bool pretrained = false;
  std::string pretrained_weights;  // checkpoint with torchvision-named encoder tensors
  std::array<int, 4> stage_channels = {256, 512, 1024, 2048};

  void validate() const;
  static BackboneConfig resnet50(bool pretrained = false, std::string weights = {});
  static BackboneConfig tiny(std::array<int, 4> channels = {16, 32, 64, 128});
};

/// Four feature stages at strides 4/8/16/32 with the configured widths.
class EncoderBase : public torch::nn::Module {
 public:
  virtual ~EncoderBase() = default;
  virtual std::array<torch::Tensor, 4> forward_stages(const torch::Tensor& x) = 0;

 protected:
  static void check_input(const torch::Tensor& x);
};

/// Standard ResNet-50 trunk (bottleneck stages 3/4/6/3). Parameter names
/// mirror torchvision's resnet50 so ImageNet weights can be copied in 1:1.
class ResNet50EncoderImpl : public EncoderBase {
 public:
  ResNet50EncoderImpl();
  std::array<torch::Tensor, 4> forward_stages(const torch::Tensor& x) override;

  torch::nn::Conv2d conv1{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr};
  torch::nn::Sequential layer1{nullptr}, layer2{nullptr}, layer3{nullptr}, layer4{nullptr};
};

/// Small stand-in with the same stride contract, for desk-scale tests and
/// finite-difference checks.
class TinyEncoderImpl : public EncoderBase {
 public:
  explicit TinyEncoderImpl(const std::array<int, 4>& channels);
  std::array<torch::Tensor, 4> forward_stages(const torch::Tensor& x) override;

  torch::nn::Sequential stem{nullptr};
  torch::nn::Sequential stage1{nullptr}, stage2{nullptr}, stage3{nullptr}, stage4{nullptr};
};

std::shared_ptr<EncoderBase> make_encoder(const BackboneConfig& cfg);

}  // namespace fusionlung

#pragma once

#include <torch/torch.h>

namespace fusionlung {

/// Residual refinement: a small encoder-decoder (stem + five convolutions
/// with four 2x poolings down, bilinear upsampling with concatenated
/// shortcuts up, 1x1 head) that predicts a logit-space correction to the
/// coarse segmentation map.
class RRMImpl : public torch::nn::Module {
 public:
  RRMImpl(int in_channels, int channels);

  /// Residual logit map for concat(coarse map, image) input.
  torch::Tensor residual(const torch::Tensor& x);

  /// Model-internal path: refined probability from the coarse logit.
  torch::Tensor forward_logit(const torch::Tensor& coarse_logit, const torch::Tensor& image);

  /// Spec-facing path: the coarse probability is clamped to
  /// [1e-6, 1-1e-6] and moved to logit space first.
  torch::Tensor forward(const torch::Tensor& coarse_prob, const torch::Tensor& image);

  /// Zeroes the output head so the module becomes an exact pass-through.
  void zero_residual_head();

  torch::nn::Conv2d stem{nullptr};
  torch::nn::Conv2d enc1{nullptr}, enc2{nullptr}, enc3{nullptr}, enc4{nullptr}, enc5{nullptr};
  torch::nn::Conv2d dec4{nullptr}, dec3{nullptr}, dec2{nullptr}, dec1{nullptr};
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(RRM);

}  // namespace fusionlung

#pragma once

#include <torch/torch.h>

namespace fusionlung {

/// Bilinear resize to an exact spatial size; identity when already there.
torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width);

/// Channel-wise aggregation attention over the deepest encoder features.
/// A 1x1 reduction and a 3x3 convolution (each batch-normalized) form the
/// intermediate map; the asymmetric 1x3/3x1 pair plus global average
/// pooling produce one scalar weight per channel, which rescales the
/// intermediate map.
///
/// The blocks in this family fuse features multiplicatively, so every
/// projection conv is paired with a batch norm; otherwise activation scale
/// grows or decays geometrically with depth.
class CAAImpl : public torch::nn::Module {
 public:
  CAAImpl(int in_channels, int channels);

  torch::Tensor forward(const torch::Tensor& x);

  // Intermediate products, split out so the math is testable stage by stage.
  torch::Tensor intermediate(const torch::Tensor& x) {
    return norm_spatial(spatial(norm_reduce(reduce(x))));
  }
  torch::Tensor channel_weights(const torch::Tensor& inter);  // [B,C,1,1]

  torch::nn::Conv2d reduce{nullptr};   // 1x1
  torch::nn::Conv2d spatial{nullptr};  // 3x3
  torch::nn::Conv2d asym_h{nullptr};   // 1x3
  torch::nn::Conv2d asym_v{nullptr};   // 3x1
  torch::nn::BatchNorm2d norm_reduce{nullptr}, norm_spatial{nullptr};
};
TORCH_MODULE(CAA);

/// Multi-scale feature fusion. Projects three sources to a common width,
/// aligns the attention and refined paths to the encoder resolution, forms
/// the three pairwise products and fuses their concatenation.
class MFFImpl : public torch::nn::Module {
 public:
  MFFImpl(int attention_channels, int encoder_channels, int refined_channels, int channels);

  /// i1: attention path, i2: encoder stage (sets the output resolution),
  /// i3: refined path from the previous (deeper) level.
  torch::Tensor forward(const torch::Tensor& i1, const torch::Tensor& i2,
                        const torch::Tensor& i3);

  torch::nn::Conv2d proj_attention{nullptr};
  torch::nn::Conv2d proj_encoder{nullptr};
  torch::nn::Conv2d proj_refined{nullptr};
  torch::nn::Conv2d fuse{nullptr};
  torch::nn::BatchNorm2d norm_attention{nullptr}, norm_encoder{nullptr}, norm_refined{nullptr},
      norm_fuse{nullptr};
};
TORCH_MODULE(MFF);

/// Self-refinement: compress to the working width, expand to twice the
/// width, split into a multiplicative and an additive half and recombine.
class SRImpl : public torch::nn::Module {
 public:
  SRImpl(int in_channels, int channels);

  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d compress{nullptr};  // F_in -> F_1
  torch::nn::Conv2d expand{nullptr};    // F_1 -> F_2 (2x width)
  torch::nn::BatchNorm2d norm_compress{nullptr}, norm_expand{nullptr};
  int channels;
};
TORCH_MODULE(SR);

}  // namespace fusionlung

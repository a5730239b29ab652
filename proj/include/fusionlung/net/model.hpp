#pragma once

#include <torch/torch.h>

#include <array>
#include <vector>

#include "fusionlung/net/blocks.hpp"
#include "fusionlung/net/encoder.hpp"
#include "fusionlung/net/rrm.hpp"
#include "fusionlung/segmentation.hpp"

namespace fusionlung {

/// Which optional components exist. All false is the ablation baseline
/// (encoder + attention + decoder only).
struct AblationFlags {
  bool use_mff = true;
  bool use_sr = true;
  bool use_rrm = true;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
  std::string label() const;
};

struct ModelConfig {
  BackboneConfig backbone;
  int fused_channels = 256;    // CAA/MFF/SR working width
  int decoder_channels = 256;
  int rrm_channels = 64;
  AblationFlags ablation;

  void validate() const;
  static ModelConfig resnet50_default();
  /// Small profile for desk-scale tests and finite-difference checks.
  static ModelConfig tiny_test(std::array<int, 4> stage_channels = {16, 32, 64, 128},
                               int fused = 16, int decoder = 16, int rrm = 8);
};

/// Top-down decoder over the four per-level fused maps. Each stage projects
/// its level, merges the upsampled deeper state and emits a 1-channel logit
/// map; logits are returned at input resolution, index 0 = shallowest.
class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(const std::array<int, 4>& in_channels, int channels);

  /// `all_heads=false` evaluates only the stage-1 head (inference path);
  /// the deeper slots come back undefined.
  std::array<torch::Tensor, 4> forward_logits(const std::array<torch::Tensor, 4>& fused,
                                              int64_t out_height, int64_t out_width,
                                              bool all_heads);

  std::array<torch::nn::Conv2d, 4> lateral{nullptr, nullptr, nullptr, nullptr};
  std::array<torch::nn::Conv2d, 4> block{nullptr, nullptr, nullptr, nullptr};
  std::array<torch::nn::Conv2d, 4> head{nullptr, nullptr, nullptr, nullptr};
};
TORCH_MODULE(Decoder);

class FusionLungNetImpl : public torch::nn::Module {
 public:
  explicit FusionLungNetImpl(const ModelConfig& cfg);

  /// Full forward pass. `with_supplementary` controls whether the four
  /// side maps are produced (training) or skipped (inference).
  SegmentationOutput forward(const torch::Tensor& images, bool with_supplementary = true);

  /// Inference-mode primary map under NoGrad.
  torch::Tensor predict(const torch::Tensor& images);

  const ModelConfig& config() const { return cfg_; }

  std::shared_ptr<EncoderBase> encoder;
  CAA caa{nullptr};
  std::array<MFF, 4> mff{nullptr, nullptr, nullptr, nullptr};  // level 1..4 when enabled
  std::array<SR, 4> sr{nullptr, nullptr, nullptr, nullptr};
  Decoder decoder{nullptr};
  RRM rrm{nullptr};

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(FusionLungNet);

/// He fan-in init for every conv weight, zero biases, identity batch norm.
/// Driven by torch's global RNG; seed beforehand for reproducible builds.
void init_parameters(torch::nn::Module& module);

/// Builds the model, applies seeded init and, when configured, copies
/// pretrained encoder weights over the fresh ones.
FusionLungNet build_model(const ModelConfig& cfg, uint64_t seed);

}  // namespace fusionlung

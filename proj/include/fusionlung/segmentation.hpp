#pragma once

#include <torch/torch.h>

#include <vector>

namespace fusionlung {

/// What the network hands back: the refined primary probability map plus,
/// in training mode, the four per-decoder-stage side maps. All maps are
/// [B,1,H,W] at input resolution, values in [0,1].
/// supplementary[0] is the shallowest stage (the coarse map the refinement
/// head corrects), supplementary[3] the deepest.
struct SegmentationOutput {
  torch::Tensor primary;
  std::vector<torch::Tensor> supplementary;
};

}  // namespace fusionlung

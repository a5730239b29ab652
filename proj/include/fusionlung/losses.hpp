#pragma once

#include <torch/torch.h>

#include <array>

#include "fusionlung/segmentation.hpp"

namespace fusionlung {

struct LossWeights {
  double lambda1 = 0.3;  // focal
  double lambda2 = 0.4;  // ssim
  double lambda3 = 0.3;  // iou
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double ssim_c1 = 1e-4;  // 0.01^2
  double ssim_c2 = 9e-4;  // 0.03^2
  int ssim_window = 11;

  void validate() const;
};

/// Per-step scalar record of every supervision term.
struct LossBreakdown {
  double focal = 0.0;  // components of the primary map's hybrid loss
  double ssim = 0.0;
  double iou = 0.0;
  double hybrid = 0.0;
  double primary = 0.0;
  std::array<double, 4> supplementary{};
  double total = 0.0;
};

/// Binary focal loss, mean over pixels. Predictions are clamped to
/// [1e-7, 1-1e-7] before the logs.
torch::Tensor focal_loss(const torch::Tensor& pred, const torch::Tensor& target, double alpha,
                         double gamma);

/// 1 - mean windowed SSIM over the edge-valid region (uniform window,
/// stride 1). Windows larger than the map shrink to the largest odd size
/// that fits.
torch::Tensor ssim_loss(const torch::Tensor& pred, const torch::Tensor& target, double c1,
                        double c2, int window);

/// 1 - soft IoU with a 1e-6 denominator guard.
torch::Tensor iou_loss(const torch::Tensor& pred, const torch::Tensor& target);

struct HybridParts {
  torch::Tensor focal;
  torch::Tensor ssim;
  torch::Tensor iou;
  torch::Tensor hybrid;  // lambda-weighted combination
};

HybridParts hybrid_loss(const torch::Tensor& pred, const torch::Tensor& target,
                        const LossWeights& w);

/// Scalar-side combination, shared by the tensor path and the logs.
inline double hybrid_combine(double focal, double ssim, double iou, const LossWeights& w) {
  return w.lambda1 * focal + w.lambda2 * ssim + w.lambda3 * iou;
}

struct TotalLossResult {
  torch::Tensor total;  // differentiable
  LossBreakdown breakdown;
};

/// Deep-supervision objective: primary hybrid loss plus the hybrid loss of
/// each supplementary map.
TotalLossResult total_loss(const SegmentationOutput& outputs, const torch::Tensor& target,
                           const LossWeights& w);

}  // namespace fusionlung

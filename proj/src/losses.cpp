#include "fusionlung/losses.hpp"

#include <algorithm>

#include "fusionlung/errors.hpp"

namespace F = torch::nn::functional;

namespace fusionlung {

namespace {

constexpr double kFocalEps = 1e-7;
constexpr double kIouEps = 1e-6;

void check_same_shape(const torch::Tensor& pred, const torch::Tensor& target) {
  if (!pred.defined() || !target.defined() || pred.sizes() != target.sizes()) {
    throw ShapeMismatch("prediction/target shape mismatch");
  }
}

// SSIM statistics run on [B,C,H,W]; lift lower ranks.
torch::Tensor to_4d(const torch::Tensor& t) {
  switch (t.dim()) {
    case 2:
      return t.unsqueeze(0).unsqueeze(0);
    case 3:
      return t.unsqueeze(0);
    case 4:
      return t;
    default:
      throw ShapeMismatch("expected a 2-4D map, got rank " + std::to_string(t.dim()));
  }
}

}  // namespace

void LossWeights::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda1 + lambda2 + lambda3 <= 0) {
    throw ConfigError("loss lambdas must be >= 0 with a positive sum");
  }
  if (focal_alpha <= 0 || focal_alpha >= 1) {
    throw ConfigError("focal_alpha must lie in (0,1)");
  }
  if (focal_gamma < 0) {
    throw ConfigError("focal_gamma must be >= 0");
  }
  if (ssim_window < 1 || ssim_window % 2 == 0) {
    throw ConfigError("ssim_window must be odd and >= 1");
  }
}

torch::Tensor focal_loss(const torch::Tensor& pred, const torch::Tensor& target, double alpha,
                         double gamma) {
  check_same_shape(pred, target);
  auto t = target.to(pred.dtype());
  auto p = pred.clamp(kFocalEps, 1.0 - kFocalEps);
  auto pos = -alpha * (1.0 - p).pow(gamma) * p.log();
  auto neg = -(1.0 - alpha) * p.pow(gamma) * (1.0 - p).log();
  return (t * pos + (1.0 - t) * neg).mean();
}

torch::Tensor ssim_loss(const torch::Tensor& pred, const torch::Tensor& target, double c1,
                        double c2, int window) {
  check_same_shape(pred, target);
  auto x = to_4d(pred);
  auto y = to_4d(target).to(x.dtype());

  int64_t h = x.size(2), w = x.size(3);
  int64_t k = std::min<int64_t>({window, h, w});
  if (k % 2 == 0) --k;
  if (k < 1) {
    throw ShapeMismatch("map too small for SSIM");
  }

  auto opts = F::AvgPool2dFuncOptions({k, k}).stride({1, 1});
  auto mu_x = F::avg_pool2d(x, opts);
  auto mu_y = F::avg_pool2d(y, opts);
  auto sigma_x = F::avg_pool2d(x * x, opts) - mu_x * mu_x;
  auto sigma_y = F::avg_pool2d(y * y, opts) - mu_y * mu_y;
  auto sigma_xy = F::avg_pool2d(x * y, opts) - mu_x * mu_y;

  auto num = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2);
  auto den = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2);
  return 1.0 - (num / den).mean();
}

torch::Tensor iou_loss(const torch::Tensor& pred, const torch::Tensor& target) {
  check_same_shape(pred, target);
  auto t = target.to(pred.dtype());
  auto inter = (pred * t).sum();
  auto uni = pred.sum() + t.sum() - inter;
  return 1.0 - inter / (uni + kIouEps);
}

HybridParts hybrid_loss(const torch::Tensor& pred, const torch::Tensor& target,
                        const LossWeights& w) {
  HybridParts parts;
  parts.focal = focal_loss(pred, target, w.focal_alpha, w.focal_gamma);
  parts.ssim = ssim_loss(pred, target, w.ssim_c1, w.ssim_c2, w.ssim_window);
  parts.iou = iou_loss(pred, target);
  parts.hybrid = w.lambda1 * parts.focal + w.lambda2 * parts.ssim + w.lambda3 * parts.iou;
  return parts;
}

TotalLossResult total_loss(const SegmentationOutput& outputs, const torch::Tensor& target,
                           const LossWeights& w) {
  if (outputs.supplementary.size() > 4) {
    throw ShapeMismatch("at most 4 supplementary maps expected");
  }
  TotalLossResult res;
  HybridParts prim = hybrid_loss(outputs.primary, target, w);
  res.breakdown.focal = prim.focal.item<double>();
  res.breakdown.ssim = prim.ssim.item<double>();
  res.breakdown.iou = prim.iou.item<double>();
  res.breakdown.hybrid = prim.hybrid.item<double>();
  res.breakdown.primary = res.breakdown.hybrid;

  res.total = prim.hybrid;
  for (size_t n = 0; n < outputs.supplementary.size(); ++n) {
    HybridParts sup = hybrid_loss(outputs.supplementary[n], target, w);
    res.breakdown.supplementary[n] = sup.hybrid.item<double>();
    res.total = res.total + sup.hybrid;
  }
  res.breakdown.total = res.total.item<double>();
  return res;
}

}  // namespace fusionlung

#include "fusionlung/net/blocks.hpp"

#include "fusionlung/errors.hpp"

namespace F = torch::nn::functional;
namespace nn = torch::nn;

namespace fusionlung {

torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(2) == height && x.size(3) == width) {
    return x;
  }
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

CAAImpl::CAAImpl(int in_channels, int channels) {
  reduce = register_module("reduce", nn::Conv2d(nn::Conv2dOptions(in_channels, channels, 1)));
  norm_reduce = register_module("norm_reduce", nn::BatchNorm2d(channels));
  spatial = register_module("spatial",
                            nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)));
  norm_spatial = register_module("norm_spatial", nn::BatchNorm2d(channels));
  asym_h = register_module(
      "asym_h", nn::Conv2d(nn::Conv2dOptions(channels, channels, {1, 3}).padding({0, 1})));
  asym_v = register_module(
      "asym_v", nn::Conv2d(nn::Conv2dOptions(channels, channels, {3, 1}).padding({1, 0})));
}

torch::Tensor CAAImpl::channel_weights(const torch::Tensor& inter) {
  auto ctx = asym_v(asym_h(inter));
  return ctx.mean({2, 3}, /*keepdim=*/true);
}

torch::Tensor CAAImpl::forward(const torch::Tensor& x) {
  auto inter = intermediate(x);
  return inter * channel_weights(inter);
}

MFFImpl::MFFImpl(int attention_channels, int encoder_channels, int refined_channels,
                 int channels) {
  auto conv3 = [&](const char* name, int in) {
    return register_module(name, nn::Conv2d(nn::Conv2dOptions(in, channels, 3).padding(1)));
  };
  proj_attention = conv3("proj_attention", attention_channels);
  proj_encoder = conv3("proj_encoder", encoder_channels);
  proj_refined = conv3("proj_refined", refined_channels);
  fuse = register_module(
      "fuse", nn::Conv2d(nn::Conv2dOptions(3 * channels, channels, 3).padding(1)));
  norm_attention = register_module("norm_attention", nn::BatchNorm2d(channels));
  norm_encoder = register_module("norm_encoder", nn::BatchNorm2d(channels));
  norm_refined = register_module("norm_refined", nn::BatchNorm2d(channels));
  norm_fuse = register_module("norm_fuse", nn::BatchNorm2d(channels));
}

torch::Tensor MFFImpl::forward(const torch::Tensor& i1, const torch::Tensor& i2,
                               const torch::Tensor& i3) {
  if (i1.size(0) != i2.size(0) || i2.size(0) != i3.size(0)) {
    throw ShapeError("MFF inputs disagree on batch size");
  }
  const int64_t h = i2.size(2), w = i2.size(3);
  auto a = norm_attention(proj_attention(upsample_to(i1, h, w)));
  auto b = norm_encoder(proj_encoder(i2));
  auto c = norm_refined(proj_refined(upsample_to(i3, h, w)));
  auto f_ab = a * b;
  auto f_ac = a * c;
  auto f_bc = b * c;
  return norm_fuse(fuse(torch::cat({f_ab, f_ac, f_bc}, 1)));
}

SRImpl::SRImpl(int in_channels, int channels_) : channels(channels_) {
  compress = register_module(
      "compress", nn::Conv2d(nn::Conv2dOptions(in_channels, channels, 3).padding(1)));
  norm_compress = register_module("norm_compress", nn::BatchNorm2d(channels));
  expand = register_module(
      "expand", nn::Conv2d(nn::Conv2dOptions(channels, 2 * channels, 3).padding(1)));
  norm_expand = register_module("norm_expand", nn::BatchNorm2d(2 * channels));
}

torch::Tensor SRImpl::forward(const torch::Tensor& x) {
  auto f1 = norm_compress(compress(x));
  auto f2 = norm_expand(expand(f1));
  auto f_mul = f2.narrow(1, 0, channels);
  auto f_add = f2.narrow(1, channels, channels);
  return torch::relu(f1 * f_mul + f_add);
}

}  // namespace fusionlung

#include "fusionlung/net/rrm.hpp"

#include "fusionlung/net/blocks.hpp"

namespace nn = torch::nn;

namespace fusionlung {

namespace {
constexpr double kLogitEps = 1e-6;
}

RRMImpl::RRMImpl(int in_channels, int channels) {
  auto conv3 = [&](const char* name, int in, int out) {
    return register_module(name, nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
  };
  stem = conv3("stem", in_channels, channels);
  enc1 = conv3("enc1", channels, channels);
  enc2 = conv3("enc2", channels, channels);
  enc3 = conv3("enc3", channels, channels);
  enc4 = conv3("enc4", channels, channels);
  enc5 = conv3("enc5", channels, channels);
  dec4 = conv3("dec4", 2 * channels, channels);
  dec3 = conv3("dec3", 2 * channels, channels);
  dec2 = conv3("dec2", 2 * channels, channels);
  dec1 = conv3("dec1", 2 * channels, channels);
  head = register_module("head", nn::Conv2d(nn::Conv2dOptions(channels, 1, 1)));
}

torch::Tensor RRMImpl::residual(const torch::Tensor& x) {
  auto x0 = torch::relu(stem(x));
  auto e1 = torch::relu(enc1(x0));
  auto e2 = torch::relu(enc2(torch::max_pool2d(e1, 2)));
  auto e3 = torch::relu(enc3(torch::max_pool2d(e2, 2)));
  auto e4 = torch::relu(enc4(torch::max_pool2d(e3, 2)));
  auto e5 = torch::relu(enc5(torch::max_pool2d(e4, 2)));

  auto up = [](const torch::Tensor& t, const torch::Tensor& ref) {
    return upsample_to(t, ref.size(2), ref.size(3));
  };
  auto d4 = torch::relu(dec4(torch::cat({up(e5, e4), e4}, 1)));
  auto d3 = torch::relu(dec3(torch::cat({up(d4, e3), e3}, 1)));
  auto d2 = torch::relu(dec2(torch::cat({up(d3, e2), e2}, 1)));
  auto d1 = torch::relu(dec1(torch::cat({up(d2, e1), e1}, 1)));
  return head(d1);
}

torch::Tensor RRMImpl::forward_logit(const torch::Tensor& coarse_logit,
                                     const torch::Tensor& image) {
  auto coarse = torch::sigmoid(coarse_logit);
  auto r = residual(torch::cat({coarse, image}, 1));
  return torch::sigmoid(coarse_logit + r);
}

torch::Tensor RRMImpl::forward(const torch::Tensor& coarse_prob, const torch::Tensor& image) {
  auto p = coarse_prob.clamp(kLogitEps, 1.0 - kLogitEps);
  auto logit = torch::log(p / (1.0 - p));
  auto r = residual(torch::cat({coarse_prob, image}, 1));
  return torch::sigmoid(logit + r);
}

void RRMImpl::zero_residual_head() {
  torch::NoGradGuard guard;
  head->weight.zero_();
  head->bias.zero_();
}

}  // namespace fusionlung

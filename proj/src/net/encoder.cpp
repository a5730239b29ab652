#include "fusionlung/net/encoder.hpp"

namespace nn = torch::nn;

namespace fusionlung {

void BackboneConfig::validate() const {
  if (variant == Variant::resnet50) {
    if (stage_channels != std::array<int, 4>{256, 512, 1024, 2048}) {
      throw ConfigError("resnet50 stage channels are fixed at [256,512,1024,2048]");
    }
  } else {
    for (int c : stage_channels) {
      if (c < 8) throw ConfigError("tiny stage channels must be >= 8");
    }
    if (pretrained) {
      throw ConfigError("the tiny backbone has no pretrained weights");
    }
  }
  if (pretrained && pretrained_weights.empty()) {
    throw ConfigError("pretrained=true requires model.pretrained_weights (see README)");
  }
}

BackboneConfig BackboneConfig::resnet50(bool pretrained, std::string weights) {
  BackboneConfig cfg;
  cfg.variant = Variant::resnet50;
  cfg.pretrained = pretrained;
  cfg.pretrained_weights = std::move(weights);
  return cfg;
}

BackboneConfig BackboneConfig::tiny(std::array<int, 4> channels) {
  BackboneConfig cfg;
  cfg.variant = Variant::tiny;
  cfg.pretrained = false;
  cfg.stage_channels = channels;
  return cfg;
}

void EncoderBase::check_input(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 3) {
    throw ShapeError("encoder expects [B,3,H,W] input");
  }
  if (x.size(2) % 32 != 0 || x.size(3) % 32 != 0) {
    throw ShapeError("input spatial dims must be divisible by 32, got " +
                     std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)));
  }
}

namespace {

class BottleneckImpl : public nn::Module {
 public:
  BottleneckImpl(int in_channels, int planes, int stride) {
    const int out_channels = planes * 4;
    conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in_channels, planes, 1).bias(false)));
    bn1 = register_module("bn1", nn::BatchNorm2d(planes));
    conv2 = register_module(
        "conv2", nn::Conv2d(nn::Conv2dOptions(planes, planes, 3).stride(stride).padding(1).bias(false)));
    bn2 = register_module("bn2", nn::BatchNorm2d(planes));
    conv3 = register_module("conv3", nn::Conv2d(nn::Conv2dOptions(planes, out_channels, 1).bias(false)));
    bn3 = register_module("bn3", nn::BatchNorm2d(out_channels));
    if (stride != 1 || in_channels != out_channels) {
      downsample = register_module(
          "downsample",
          nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 1).stride(stride).bias(false)),
                         nn::BatchNorm2d(out_channels)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto out = torch::relu(bn1(conv1(x)));
    out = torch::relu(bn2(conv2(out)));
    out = bn3(conv3(out));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(out + identity);
  }

  nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  nn::Sequential downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

nn::Sequential make_layer(int in_channels, int planes, int blocks, int stride) {
  nn::Sequential layer;
  layer->push_back(Bottleneck(in_channels, planes, stride));
  for (int i = 1; i < blocks; ++i) {
    layer->push_back(Bottleneck(planes * 4, planes, 1));
  }
  return layer;
}

}  // namespace

ResNet50EncoderImpl::ResNet50EncoderImpl() {
  conv1 = register_module("conv1",
                          nn::Conv2d(nn::Conv2dOptions(3, 64, 7).stride(2).padding(3).bias(false)));
  bn1 = register_module("bn1", nn::BatchNorm2d(64));
  layer1 = register_module("layer1", make_layer(64, 64, 3, 1));
  layer2 = register_module("layer2", make_layer(256, 128, 4, 2));
  layer3 = register_module("layer3", make_layer(512, 256, 6, 2));
  layer4 = register_module("layer4", make_layer(1024, 512, 3, 2));
}

std::array<torch::Tensor, 4> ResNet50EncoderImpl::forward_stages(const torch::Tensor& x) {
  check_input(x);
  auto y = torch::relu(bn1(conv1(x)));
  y = torch::max_pool2d(y, 3, 2, 1);
  auto f1 = layer1->forward(y);
  auto f2 = layer2->forward(f1);
  auto f3 = layer3->forward(f2);
  auto f4 = layer4->forward(f3);
  return {f1, f2, f3, f4};
}

namespace {

nn::Conv2d conv3x3(int in, int out, int stride) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false));
}

nn::Sequential conv_bn_relu(int in, int out, int stride) {
  return nn::Sequential(conv3x3(in, out, stride), nn::BatchNorm2d(out), nn::ReLU());
}

nn::Sequential tiny_stage(int in, int out, int stride) {
  return nn::Sequential(conv3x3(in, out, stride), nn::BatchNorm2d(out), nn::ReLU(),
                        conv3x3(out, out, 1), nn::BatchNorm2d(out), nn::ReLU());
}

}  // namespace

TinyEncoderImpl::TinyEncoderImpl(const std::array<int, 4>& ch) {
  stem = register_module("stem", conv_bn_relu(3, ch[0], 2));
  stage1 = register_module("stage1", tiny_stage(ch[0], ch[0], 1));
  stage2 = register_module("stage2", tiny_stage(ch[0], ch[1], 2));
  stage3 = register_module("stage3", tiny_stage(ch[1], ch[2], 2));
  stage4 = register_module("stage4", tiny_stage(ch[2], ch[3], 2));
}

std::array<torch::Tensor, 4> TinyEncoderImpl::forward_stages(const torch::Tensor& x) {
  check_input(x);
  auto y = stem->forward(x);
  y = torch::max_pool2d(y, 3, 2, 1);
  auto f1 = stage1->forward(y);
  auto f2 = stage2->forward(f1);
  auto f3 = stage3->forward(f2);
  auto f4 = stage4->forward(f3);
  return {f1, f2, f3, f4};
}

std::shared_ptr<EncoderBase> make_encoder(const BackboneConfig& cfg) {
  cfg.validate();
  if (cfg.variant == BackboneConfig::Variant::resnet50) {
    return std::make_shared<ResNet50EncoderImpl>();
  }
  return std::make_shared<TinyEncoderImpl>(cfg.stage_channels);
}

}  // namespace fusionlung

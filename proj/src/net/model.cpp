#include "fusionlung/net/model.hpp"

#include "fusionlung/checkpoint.hpp"
#include "fusionlung/errors.hpp"

namespace nn = torch::nn;

namespace fusionlung {

std::string AblationFlags::label() const {
  std::string s = "baseline";
  if (use_mff) s += "+MFF";
  if (use_sr) s += "+SR";
  if (use_rrm) s += "+RRM";
  return s;
}

void ModelConfig::validate() const {
  backbone.validate();
  if (fused_channels < 4 || decoder_channels < 4 || rrm_channels < 4) {
    throw ConfigError("model channel widths must be >= 4");
  }
}

ModelConfig ModelConfig::resnet50_default() {
  ModelConfig cfg;
  cfg.backbone = BackboneConfig::resnet50();
  return cfg;
}

ModelConfig ModelConfig::tiny_test(std::array<int, 4> stage_channels, int fused, int decoder,
                                   int rrm) {
  ModelConfig cfg;
  cfg.backbone = BackboneConfig::tiny(stage_channels);
  cfg.fused_channels = fused;
  cfg.decoder_channels = decoder;
  cfg.rrm_channels = rrm;
  return cfg;
}

DecoderImpl::DecoderImpl(const std::array<int, 4>& in_channels, int channels) {
  for (int i = 0; i < 4; ++i) {
    std::string n = std::to_string(i + 1);
    lateral[i] = register_module(
        "lateral" + n, nn::Conv2d(nn::Conv2dOptions(in_channels[i], channels, 3).padding(1)));
    int block_in = i == 3 ? channels : 2 * channels;  // deepest stage has no top-down input
    block[i] = register_module(
        "block" + n, nn::Conv2d(nn::Conv2dOptions(block_in, channels, 3).padding(1)));
    head[i] = register_module("head" + n, nn::Conv2d(nn::Conv2dOptions(channels, 1, 1)));
  }
}

std::array<torch::Tensor, 4> DecoderImpl::forward_logits(
    const std::array<torch::Tensor, 4>& fused, int64_t out_height, int64_t out_width,
    bool all_heads) {
  std::array<torch::Tensor, 4> logits;
  torch::Tensor state = torch::relu(block[3](lateral[3](fused[3])));
  if (all_heads) {
    logits[3] = upsample_to(head[3](state), out_height, out_width);
  }
  for (int i = 2; i >= 0; --i) {
    auto lat = lateral[i](fused[i]);
    auto up = upsample_to(state, lat.size(2), lat.size(3));
    state = torch::relu(block[i](torch::cat({lat, up}, 1)));
    if (all_heads || i == 0) {
      logits[i] = upsample_to(head[i](state), out_height, out_width);
    }
  }
  return logits;
}

FusionLungNetImpl::FusionLungNetImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto& stage_ch = cfg_.backbone.stage_channels;
  const int fused_ch = cfg_.fused_channels;

  encoder = make_encoder(cfg_.backbone);
  register_module("encoder", encoder);
  caa = register_module("caa", CAA(stage_ch[3], fused_ch));

  std::array<int, 4> decoder_in;
  for (int lvl = 1; lvl <= 4; ++lvl) {
    const int i = lvl - 1;
    const std::string n = std::to_string(lvl);
    if (cfg_.ablation.use_mff) {
      mff[i] = register_module("mff" + n, MFF(fused_ch, stage_ch[i], fused_ch, fused_ch));
    }
    if (cfg_.ablation.use_sr) {
      int sr_in = cfg_.ablation.use_mff || lvl == 4 ? fused_ch : stage_ch[i];
      sr[i] = register_module("sr" + n, SR(sr_in, fused_ch));
    }
    decoder_in[i] =
        cfg_.ablation.use_mff || cfg_.ablation.use_sr || lvl == 4 ? fused_ch : stage_ch[i];
  }
  decoder = register_module("decoder", Decoder(decoder_in, cfg_.decoder_channels));
  if (cfg_.ablation.use_rrm) {
    rrm = register_module("rrm", RRM(4, cfg_.rrm_channels));
  }
}

SegmentationOutput FusionLungNetImpl::forward(const torch::Tensor& images,
                                              bool with_supplementary) {
  if (images.dim() != 4) {
    throw ShapeError("model expects [B,3,H,W] input");
  }
  const int64_t out_h = images.size(2), out_w = images.size(3);

  auto stages = encoder->forward_stages(images);
  auto attention = caa(stages[3]);

  std::array<torch::Tensor, 4> fused;
  torch::Tensor prev = attention;  // deepest level reuses the attention map
  for (int lvl = 4; lvl >= 1; --lvl) {
    const int i = lvl - 1;
    torch::Tensor m;
    if (cfg_.ablation.use_mff) {
      m = mff[i]->forward(attention, stages[i], prev);
    } else {
      m = lvl == 4 ? attention : stages[i];
    }
    fused[i] = cfg_.ablation.use_sr ? sr[i]->forward(m) : m;
    prev = fused[i];
  }

  auto logits = decoder->forward_logits(fused, out_h, out_w, with_supplementary);

  SegmentationOutput out;
  if (cfg_.ablation.use_rrm) {
    out.primary = rrm->forward_logit(logits[0], images);
  } else {
    out.primary = torch::sigmoid(logits[0]);
  }
  if (with_supplementary) {
    out.supplementary.reserve(4);
    for (int i = 0; i < 4; ++i) {
      out.supplementary.push_back(torch::sigmoid(logits[i]));
    }
  }
  return out;
}

torch::Tensor FusionLungNetImpl::predict(const torch::Tensor& images) {
  torch::NoGradGuard guard;
  bool was_training = is_training();
  eval();
  auto primary = forward(images, /*with_supplementary=*/false).primary;
  train(was_training);
  return primary;
}

namespace {

// The attention/fusion blocks follow the paper's equations with no
// normalization and combine features multiplicatively, so their convs get
// variance-preserving (linear-gain) init; anything feeding a ReLU keeps the
// usual He gain. Without this the products blow up at init and the output
// sigmoids saturate.
bool linear_role(const std::string& name) {
  return name.rfind("caa.", 0) == 0 || name.rfind("mff", 0) == 0 || name.rfind("sr", 0) == 0 ||
         name.find("lateral") != std::string::npos || name.find("head") != std::string::npos;
}

}  // namespace

void init_parameters(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (const auto& item : module.named_modules("", /*include_self=*/false)) {
    if (auto* conv = item.value()->as<nn::Conv2d>()) {
      if (linear_role(item.key())) {
        torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kLinear);
      } else {
        torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
      }
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* bn = item.value()->as<nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
      bn->running_mean.zero_();
      bn->running_var.fill_(1.0);
    }
  }
}

namespace {

void load_pretrained_encoder(EncoderBase& encoder, const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  torch::NoGradGuard guard;
  auto copy_named = [&](const torch::OrderedDict<std::string, torch::Tensor>& dst,
                        bool required) {
    for (const auto& item : dst) {
      auto it = ck.tensors.find(item.key());
      if (it == ck.tensors.end()) {
        if (required) {
          throw ConfigError("pretrained weights are missing tensor '" + item.key() + "'");
        }
        continue;
      }
      if (it->second.sizes() != item.value().sizes()) {
        throw ConfigError("pretrained tensor '" + item.key() + "' has the wrong shape");
      }
      item.value().copy_(it->second.to(item.value().dtype()));
    }
  };
  copy_named(encoder.named_parameters(), /*required=*/true);
  copy_named(encoder.named_buffers(), /*required=*/false);  // num_batches_tracked may be absent
}

}  // namespace

FusionLungNet build_model(const ModelConfig& cfg, uint64_t seed) {
  torch::manual_seed(seed);
  FusionLungNet model(cfg);
  init_parameters(*model);
  if (cfg.backbone.pretrained) {
    load_pretrained_encoder(*model->encoder, cfg.backbone.pretrained_weights);
  }
  return model;
}

}  // namespace fusionlung

#include "fusionlung/config.hpp"

#include <fstream>

#include "fusionlung/errors.hpp"

namespace fusionlung {

using nlohmann::json;

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "adamax") return OptimizerKind::adamax;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + name + "' (adam|adamax|rmsprop|sgd)");
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::adam:
      return "adam";
    case OptimizerKind::adamax:
      return "adamax";
    case OptimizerKind::rmsprop:
      return "rmsprop";
    case OptimizerKind::sgd:
      return "sgd";
  }
  return "adam";
}

void TrainSettings::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (learning_rate <= 0) throw ConfigError("train.learning_rate must be > 0");
  if (input_height % 32 != 0 || input_width % 32 != 0) {
    throw ConfigError("train.input_size must be divisible by 32");
  }
  if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be >= 1");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("train.val_fraction must lie in [0,1)");
  }
}

void RunConfig::validate() const {
  preprocess.validate();
  model.validate();
  loss.validate();
  train.validate();
  if (eval.threshold <= 0.0 || eval.threshold >= 1.0) {
    throw ConfigError("eval.threshold must lie in (0,1)");
  }
}

json to_json(const RunConfig& cfg) {
  const auto& b = cfg.model.backbone;
  return json{
      {"dataset",
       {{"root", cfg.dataset.root},
        {"test_count", cfg.dataset.test_count},
        {"split_seed", cfg.dataset.split_seed}}},
      {"preprocess",
       {{"target_size", {cfg.preprocess.target_height, cfg.preprocess.target_width}},
        {"median_window", cfg.preprocess.median_window},
        {"thresh_window", cfg.preprocess.thresh_window},
        {"thresh_k", cfg.preprocess.thresh_k},
        {"enhance_alpha", cfg.preprocess.enhance_alpha},
        {"enhance_beta", cfg.preprocess.enhance_beta},
        {"artifact_removal", cfg.preprocess.artifact_removal}}},
      {"model",
       {{"backbone", b.variant == BackboneConfig::Variant::resnet50 ? "resnet50" : "tiny"},
        {"pretrained", b.pretrained},
        {"pretrained_weights", b.pretrained_weights},
        {"stage_channels", b.stage_channels},
        {"fused_channels", cfg.model.fused_channels},
        {"decoder_channels", cfg.model.decoder_channels},
        {"rrm_channels", cfg.model.rrm_channels},
        {"ablation",
         {{"use_mff", cfg.model.ablation.use_mff},
          {"use_sr", cfg.model.ablation.use_sr},
          {"use_rrm", cfg.model.ablation.use_rrm}}}}},
      {"loss",
       {{"lambda1", cfg.loss.lambda1},
        {"lambda2", cfg.loss.lambda2},
        {"lambda3", cfg.loss.lambda3},
        {"focal_alpha", cfg.loss.focal_alpha},
        {"focal_gamma", cfg.loss.focal_gamma},
        {"ssim_c1", cfg.loss.ssim_c1},
        {"ssim_c2", cfg.loss.ssim_c2},
        {"ssim_window", cfg.loss.ssim_window}}},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"learning_rate", cfg.train.learning_rate},
        {"optimizer", to_string(cfg.train.optimizer)},
        {"input_size", {cfg.train.input_height, cfg.train.input_width}},
        {"seed", cfg.train.seed},
        {"checkpoint_every", cfg.train.checkpoint_every},
        {"val_fraction", cfg.train.val_fraction}}},
      {"eval", {{"threshold", cfg.eval.threshold}, {"macro", cfg.eval.macro}}},
  };
}

namespace {

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_size(const json& j, const char* key, int& h, int& w) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(std::string(key) + " must be a [height, width] pair");
  }
  h = v[0].get<int>();
  w = v[1].get<int>();
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    maybe_get(d, "root", cfg.dataset.root);
    maybe_get(d, "test_count", cfg.dataset.test_count);
    maybe_get(d, "split_seed", cfg.dataset.split_seed);
  }
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    parse_size(p, "target_size", cfg.preprocess.target_height, cfg.preprocess.target_width);
    maybe_get(p, "median_window", cfg.preprocess.median_window);
    maybe_get(p, "thresh_window", cfg.preprocess.thresh_window);
    maybe_get(p, "thresh_k", cfg.preprocess.thresh_k);
    maybe_get(p, "enhance_alpha", cfg.preprocess.enhance_alpha);
    maybe_get(p, "enhance_beta", cfg.preprocess.enhance_beta);
    maybe_get(p, "artifact_removal", cfg.preprocess.artifact_removal);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    std::string backbone = "resnet50";
    maybe_get(m, "backbone", backbone);
    if (backbone == "resnet50") {
      cfg.model.backbone = BackboneConfig::resnet50();
    } else if (backbone == "tiny") {
      cfg.model.backbone = BackboneConfig::tiny();
      cfg.model.fused_channels = 16;
      cfg.model.decoder_channels = 16;
      cfg.model.rrm_channels = 8;
    } else {
      throw ConfigError("model.backbone must be 'resnet50' or 'tiny'");
    }
    maybe_get(m, "pretrained", cfg.model.backbone.pretrained);
    maybe_get(m, "pretrained_weights", cfg.model.backbone.pretrained_weights);
    if (m.contains("stage_channels")) {
      auto v = m.at("stage_channels").get<std::vector<int>>();
      if (v.size() != 4) throw ConfigError("model.stage_channels must have 4 entries");
      std::copy(v.begin(), v.end(), cfg.model.backbone.stage_channels.begin());
    }
    maybe_get(m, "fused_channels", cfg.model.fused_channels);
    maybe_get(m, "decoder_channels", cfg.model.decoder_channels);
    maybe_get(m, "rrm_channels", cfg.model.rrm_channels);
    if (m.contains("ablation")) {
      const auto& a = m.at("ablation");
      maybe_get(a, "use_mff", cfg.model.ablation.use_mff);
      maybe_get(a, "use_sr", cfg.model.ablation.use_sr);
      maybe_get(a, "use_rrm", cfg.model.ablation.use_rrm);
    }
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    maybe_get(l, "lambda1", cfg.loss.lambda1);
    maybe_get(l, "lambda2", cfg.loss.lambda2);
    maybe_get(l, "lambda3", cfg.loss.lambda3);
    maybe_get(l, "focal_alpha", cfg.loss.focal_alpha);
    maybe_get(l, "focal_gamma", cfg.loss.focal_gamma);
    maybe_get(l, "ssim_c1", cfg.loss.ssim_c1);
    maybe_get(l, "ssim_c2", cfg.loss.ssim_c2);
    maybe_get(l, "ssim_window", cfg.loss.ssim_window);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    maybe_get(t, "epochs", cfg.train.epochs);
    maybe_get(t, "batch_size", cfg.train.batch_size);
    maybe_get(t, "learning_rate", cfg.train.learning_rate);
    if (t.contains("optimizer")) {
      cfg.train.optimizer = optimizer_from_string(t.at("optimizer").get<std::string>());
    }
    parse_size(t, "input_size", cfg.train.input_height, cfg.train.input_width);
    maybe_get(t, "seed", cfg.train.seed);
    maybe_get(t, "checkpoint_every", cfg.train.checkpoint_every);
    maybe_get(t, "val_fraction", cfg.train.val_fraction);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    maybe_get(e, "threshold", cfg.eval.threshold);
    maybe_get(e, "macro", cfg.eval.macro);
  }
  return cfg;
}

namespace {

json parse_override_value(const std::string& raw) {
  // Accept bare strings where JSON parsing fails ("--set model.backbone=tiny").
  auto parsed = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) return json(raw);
  return parsed;
}

void apply_override(json& doc, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + spec + "' must look like path.to.key=value");
  }
  std::string path = spec.substr(0, eq);
  json value = parse_override_value(spec.substr(eq + 1));

  json* node = &doc;
  size_t start = 0;
  while (true) {
    size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override '" + spec + "' has an empty path segment");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    throw ConfigError(path.string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig cfg = run_config_from_json(doc);
  cfg.validate();
  return cfg;
}

json default_config_json() { return to_json(RunConfig{}); }

}  // namespace fusionlung

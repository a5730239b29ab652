#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "fusionlung/losses.hpp"
#include "fusionlung/net/model.hpp"
#include "fusionlung/preprocess.hpp"

namespace fusionlung {

enum class OptimizerKind { adam, adamax, rmsprop, sgd };

OptimizerKind optimizer_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

struct DatasetConfig {
  std::string root;
  size_t test_count = 150;
  uint64_t split_seed = 7;
};

struct TrainSettings {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  int input_height = 320;
  int input_width = 320;
  uint64_t seed = 7;
  int checkpoint_every = 1;  // epochs
  double val_fraction = 0.1;

  void validate() const;
};

struct EvalSettings {
  double threshold = 0.5;
  bool macro = false;  // per-image averaging instead of micro counts
};

/// Everything one run needs; serialized as a single JSON document.
struct RunConfig {
  DatasetConfig dataset;
  PreprocessConfig preprocess;
  ModelConfig model;
  LossWeights loss;
  TrainSettings train;
  EvalSettings eval;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Loads + validates a config file. `overrides` are dotted.path=value
/// pairs applied on top of the file before validation.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

/// Default config document (the resnet50 paper profile), for --init.
nlohmann::json default_config_json();

}  // namespace fusionlung

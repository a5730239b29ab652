#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace fusionlung {

/// Bookkeeping stored alongside the tensors. `extra` is free-form JSON
/// (stringified) for callers that need more.
struct CheckpointManifest {
  std::string config_hash;
  int64_t epoch = 0;
  int64_t step = 0;
  uint64_t seed = 0;
  double best_val_iou = 0.0;
  std::string created;  // ISO-8601
  std::string extra;    // JSON object, optional
};

struct Checkpoint {
  CheckpointManifest manifest;
  std::map<std::string, torch::Tensor> tensors;
  std::string optimizer_blob;  // opaque serialized optimizer state
};

/// Single-file archive: manifest JSON + named tensors (raw little-endian
/// bytes) + an optional optimizer blob. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Collects parameters and buffers of a module into checkpoint tensors
/// (detached CPU contiguous copies).
std::map<std::string, torch::Tensor> snapshot_state(const torch::nn::Module& module);

/// Copies matching tensors back into a module's parameters and buffers.
/// Throws on missing names or shape mismatches.
void restore_state(torch::nn::Module& module, const std::map<std::string, torch::Tensor>& tensors);

}  // namespace fusionlung

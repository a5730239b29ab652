#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "fusionlung/config.hpp"
#include "fusionlung/dataset.hpp"
#include "fusionlung/metrics.hpp"
#include "fusionlung/net/model.hpp"

namespace fusionlung {

/// Loads a processed image (16- or 8-bit grayscale PNG) and its mask,
/// resized to the requested input size, as ([3,H,W] float, [1,H,W] float).
std::pair<torch::Tensor, torch::Tensor> load_training_pair(const DatasetEntry& entry,
                                                           int height, int width);

/// Stacks a batch of ids into model input / target tensors.
std::pair<torch::Tensor, torch::Tensor> assemble_batch(const DatasetIndex& index,
                                                       const std::vector<std::string>& ids,
                                                       int height, int width);

struct TrainResult {
  int64_t epochs_run = 0;
  int64_t steps = 0;
  double best_val_iou = 0.0;
  bool diverged = false;
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
  std::vector<double> epoch_median_loss;
  std::vector<double> first_step_losses;  // step-0/1 values, for determinism checks
  FusionLungNet model{nullptr};           // final in-memory state
};

/// Runs the §5.1 loop: seeded model build, per-epoch shuffled batches,
/// total loss, one optimizer update per step, CSV step log, periodic +
/// best-by-validation-IoU checkpoints. A non-finite loss aborts with
/// `diverged` set and the last good checkpoint retained.
TrainResult train(const RunConfig& cfg, const DatasetIndex& train_index,
                  const std::filesystem::path& run_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

/// Micro-averaged (default) or macro-averaged evaluation of a model over
/// an index at the configured threshold. Per-image rows go to `per_image`
/// when provided.
MetricReport evaluate_dataset(FusionLungNet& model, const DatasetIndex& index,
                              const RunConfig& cfg,
                              std::vector<std::pair<std::string, MetricReport>>* per_image = nullptr);

/// Convenience: load a checkpoint into a model built from cfg.
FusionLungNet load_model_checkpoint(const RunConfig& cfg, const std::filesystem::path& ckpt);

struct SweepRow {
  std::string label;
  MetricReport report;
  bool failed = false;
  std::string error;
};

/// Train+evaluate once per ablation flag set, in the given order. Rows
/// share seed, data and hyperparameters; a failed row is reported and the
/// sweep continues.
std::vector<SweepRow> ablate(const RunConfig& base, const DatasetIndex& train_index,
                             const DatasetIndex& test_index,
                             const std::vector<AblationFlags>& grid,
                             const std::filesystem::path& work_dir);

/// Default five-row grid: baseline; +MFF; +RRM; +MFF+SR; +MFF+SR+RRM.
std::vector<AblationFlags> default_ablation_grid();

std::vector<SweepRow> sweep_lambda(const RunConfig& base, const DatasetIndex& train_index,
                                   const DatasetIndex& test_index,
                                   const std::vector<std::array<double, 3>>& rows,
                                   const std::filesystem::path& work_dir);

std::vector<SweepRow> sweep_input_size(const RunConfig& base, const DatasetIndex& train_index,
                                       const DatasetIndex& test_index,
                                       const std::vector<int>& sizes,
                                       const std::filesystem::path& work_dir);

std::vector<SweepRow> sweep_optimizer(const RunConfig& base, const DatasetIndex& train_index,
                                      const DatasetIndex& test_index,
                                      const std::vector<OptimizerKind>& optimizers,
                                      const std::filesystem::path& work_dir);

/// Loss-function ablation via lambda masking: "focal", "iou", "focal+iou",
/// "focal+ssim+iou".
std::vector<SweepRow> sweep_losses(const RunConfig& base, const DatasetIndex& train_index,
                                   const DatasetIndex& test_index,
                                   const std::vector<std::string>& combos,
                                   const std::filesystem::path& work_dir);

void write_sweep_outputs(const std::filesystem::path& dir, const std::string& name,
                         const std::vector<SweepRow>& rows);

}  // namespace fusionlung

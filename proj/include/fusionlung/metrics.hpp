#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>

#include "fusionlung/image.hpp"

namespace fusionlung {

struct ConfusionCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t tn = 0;

  int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MetricReport {
  double iou = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  double mcc = 0.0;
  ConfusionCounts counts;
  double threshold = 0.5;
};

/// Thresholds pred (>= threshold is positive) against a {0,1} target and
/// tallies the four confusion cells over every pixel.
ConfusionCounts confusion(const torch::Tensor& pred, const torch::Tensor& target,
                          double threshold);
ConfusionCounts confusion(const torch::Tensor& pred, const BinaryMask& target, double threshold);

/// Derived ratios. Degenerate 0/0 cases: precision/recall/F1/IoU are 1 when
/// both prediction and target are empty (nothing to get wrong); MCC is 0
/// when any denominator factor vanishes.
MetricReport compute_metrics(const ConfusionCounts& counts, double threshold = 0.5);

/// "IoU F1 Precision Recall Acc MCC" row, values in percent, aligned.
std::string format_metric_row(const MetricReport& report, const std::string& label = "");
std::string metric_table_header(const std::string& label_header = "");

void write_metrics_json(const std::filesystem::path& path, const MetricReport& report,
                        const std::string& checkpoint_hash, const std::string& split_hash);

}  // namespace fusionlung

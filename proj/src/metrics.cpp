#include "fusionlung/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fusionlung/errors.hpp"

namespace fusionlung {

ConfusionCounts confusion(const torch::Tensor& pred, const torch::Tensor& target,
                          double threshold) {
  if (pred.sizes() != target.sizes()) {
    throw ShapeMismatch("confusion: prediction/target shape mismatch");
  }
  auto p = pred.ge(threshold);
  auto t = target.to(torch::kBool);
  ConfusionCounts c;
  c.tp = (p & t).sum().item<int64_t>();
  c.fp = (p & ~t).sum().item<int64_t>();
  c.fn = (~p & t).sum().item<int64_t>();
  c.tn = (~p & ~t).sum().item<int64_t>();
  return c;
}

ConfusionCounts confusion(const torch::Tensor& pred, const BinaryMask& target, double threshold) {
  auto t = torch::from_blob(const_cast<uint8_t*>(target.pixels.data()),
                            {target.height, target.width}, torch::kUInt8);
  return confusion(pred.view({target.height, target.width}), t, threshold);
}

MetricReport compute_metrics(const ConfusionCounts& c, double threshold) {
  MetricReport r;
  r.counts = c;
  r.threshold = threshold;

  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  const double tn = static_cast<double>(c.tn);

  // Empty-on-both-sides conventions resolve to 1; see module docs.
  r.precision = (c.tp + c.fp) > 0 ? tp / (tp + fp) : (c.fn == 0 ? 1.0 : 0.0);
  r.recall = (c.tp + c.fn) > 0 ? tp / (tp + fn) : (c.fp == 0 ? 1.0 : 0.0);
  r.f1 = (2 * c.tp + c.fp + c.fn) > 0 ? 2.0 * tp / (2.0 * tp + fp + fn)
                                      : 1.0;  // no positives anywhere
  r.accuracy = c.total() > 0 ? (tp + tn) / static_cast<double>(c.total()) : 1.0;
  r.iou = (c.tp + c.fp + c.fn) > 0 ? tp / (tp + fp + fn) : 1.0;

  double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  r.mcc = denom > 0.0 ? (tp * tn - fp * fn) / std::sqrt(denom) : 0.0;
  return r;
}

std::string metric_table_header(const std::string& label_header) {
  std::ostringstream os;
  if (!label_header.empty()) {
    os << std::left << std::setw(48) << label_header;
  }
  os << std::right << std::setw(8) << "IoU" << std::setw(8) << "F1" << std::setw(11)
     << "Precision" << std::setw(8) << "Recall" << std::setw(8) << "Acc" << std::setw(8) << "MCC";
  return os.str();
}

std::string format_metric_row(const MetricReport& r, const std::string& label) {
  std::ostringstream os;
  if (!label.empty()) {
    os << std::left << std::setw(48) << label;
  }
  os << std::right << std::fixed << std::setprecision(2);
  os << std::setw(8) << r.iou * 100 << std::setw(8) << r.f1 * 100 << std::setw(11)
     << r.precision * 100 << std::setw(8) << r.recall * 100 << std::setw(8) << r.accuracy * 100
     << std::setw(8) << r.mcc * 100;
  return os.str();
}

void write_metrics_json(const std::filesystem::path& path, const MetricReport& r,
                        const std::string& checkpoint_hash, const std::string& split_hash) {
  nlohmann::json j{
      {"iou", r.iou},
      {"f1", r.f1},
      {"precision", r.precision},
      {"recall", r.recall},
      {"accuracy", r.accuracy},
      {"mcc", r.mcc},
      {"threshold", r.threshold},
      {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}},
      {"checkpoint_hash", checkpoint_hash},
      {"split_manifest_hash", split_hash},
  };
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << j.dump(2) << "\n";
}

}  // namespace fusionlung

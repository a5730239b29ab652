#include "fusionlung/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fusionlung/checkpoint.hpp"
#include "fusionlung/losses.hpp"
#include "fusionlung/optim.hpp"
#include "fusionlung/rundir.hpp"

#include <ATen/Context.h>

namespace fs = std::filesystem;

namespace fusionlung {

namespace {

torch::Tensor gray_to_tensor(const GrayImage& img) {
  auto t = torch::from_blob(const_cast<float*>(img.pixels.data()), {img.height, img.width},
                            torch::kFloat32)
               .clone();
  return t.unsqueeze(0).repeat({3, 1, 1});  // grayscale replicated to 3 channels
}

torch::Tensor mask_to_tensor(const BinaryMask& mask) {
  auto t = torch::from_blob(const_cast<uint8_t*>(mask.pixels.data()), {mask.height, mask.width},
                            torch::kUInt8)
               .to(torch::kFloat32);
  return t.unsqueeze(0);
}

std::string checkpoint_name(int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt-%04lld.flnck", static_cast<long long>(epoch));
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return (hi + *std::max_element(v.begin(), v.begin() + mid)) / 2.0;
}

}  // namespace

std::pair<torch::Tensor, torch::Tensor> load_training_pair(const DatasetEntry& entry, int height,
                                                           int width) {
  GrayImage img = read_gray_unit(entry.image_path);
  if (img.height != height || img.width != width) {
    img = resize_unit(img, height, width);
  }
  BinaryMask mask = read_mask(entry.mask_path);
  if (mask.height != height || mask.width != width) {
    mask = resize_mask(mask, height, width);
  }
  return {gray_to_tensor(img), mask_to_tensor(mask)};
}

std::pair<torch::Tensor, torch::Tensor> assemble_batch(const DatasetIndex& index,
                                                       const std::vector<std::string>& ids,
                                                       int height, int width) {
  std::vector<torch::Tensor> images, masks;
  images.reserve(ids.size());
  masks.reserve(ids.size());
  for (const auto& id : ids) {
    auto entry = index.find(id);
    if (!entry) throw Error("batch id '" + id + "' not in index");
    auto [img, mask] = load_training_pair(*entry, height, width);
    images.push_back(img);
    masks.push_back(mask);
  }
  return {torch::stack(images), torch::stack(masks)};
}

namespace {

void save_training_checkpoint(const fs::path& path, FusionLungNet& model, Optimizer& optim,
                              CheckpointManifest manifest) {
  Checkpoint ck;
  manifest.created = iso8601_now();
  ck.manifest = std::move(manifest);
  for (auto& [name, tensor] : snapshot_state(*model)) {
    ck.tensors.emplace("model." + name, std::move(tensor));
  }
  for (auto& [name, tensor] : optim.state()) {
    ck.tensors.emplace("optim." + name, tensor.detach().clone());
  }
  ck.tensors.emplace("rng_state", at::detail::getDefaultCPUGenerator().get_state().clone());
  save_checkpoint(path, ck);
}

std::map<std::string, torch::Tensor> strip_prefix(const std::map<std::string, torch::Tensor>& all,
                                                  const std::string& prefix) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& [name, tensor] : all) {
    if (name.rfind(prefix, 0) == 0) {
      out.emplace(name.substr(prefix.size()), tensor);
    }
  }
  return out;
}

}  // namespace

FusionLungNet load_model_checkpoint(const RunConfig& cfg, const fs::path& ckpt_path) {
  auto model = build_model(cfg.model, cfg.train.seed);
  Checkpoint ck = load_checkpoint(ckpt_path);
  restore_state(*model, strip_prefix(ck.tensors, "model."));
  return model;
}

TrainResult train(const RunConfig& cfg, const DatasetIndex& train_index, const fs::path& run_dir,
                  const std::optional<fs::path>& resume) {
  cfg.validate();
  if (train_index.empty()) {
    throw EmptyDataset("training split is empty");
  }
  fs::create_directories(run_dir);

  // Hold out a validation slice for best-checkpoint selection.
  DatasetIndex fit = train_index;
  DatasetIndex val;
  size_t val_count = static_cast<size_t>(cfg.train.val_fraction * train_index.size());
  if (cfg.train.val_fraction > 0 && val_count == 0 && train_index.size() >= 4) val_count = 1;
  if (val_count > 0 && val_count < train_index.size()) {
    std::tie(fit, val) = split_dataset(train_index, val_count, cfg.train.seed ^ 0x5eedULL);
  }

  const std::string config_hash = sha256_hex(to_json(cfg).dump());
  auto model = build_model(cfg.model, cfg.train.seed);
  auto optim = make_optimizer(cfg.train.optimizer, model->parameters(), cfg.train.learning_rate);

  TrainResult result;
  result.best_val_iou = -1.0;
  int64_t start_epoch = 0;
  int64_t global_step = 0;

  if (resume) {
    Checkpoint ck = load_checkpoint(*resume);
    restore_state(*model, strip_prefix(ck.tensors, "model."));
    optim->load_state(strip_prefix(ck.tensors, "optim."));
    if (auto it = ck.tensors.find("rng_state"); it != ck.tensors.end()) {
      auto gen = at::detail::getDefaultCPUGenerator();
      gen.set_state(it->second);
    }
    start_epoch = ck.manifest.epoch;
    global_step = ck.manifest.step;
    result.best_val_iou = ck.manifest.best_val_iou;
  }

  std::ofstream step_log(run_dir / "steps.csv", resume ? std::ios::app : std::ios::out);
  if (!resume) {
    step_log << "step,focal,ssim,iou,primary,sup1,sup2,sup3,sup4,total\n";
  }

  auto manifest_for = [&](int64_t epoch) {
    CheckpointManifest m;
    m.config_hash = config_hash;
    m.epoch = epoch;
    m.step = global_step;
    m.seed = cfg.train.seed;
    m.best_val_iou = std::max(result.best_val_iou, 0.0);
    return m;
  };

  const fs::path last_path = run_dir / "ckpt-last.flnck";
  const fs::path best_path = run_dir / "ckpt-best.flnck";

  result.model = model;

  if (cfg.train.epochs == 0 || start_epoch >= cfg.train.epochs) {
    save_training_checkpoint(last_path, model, *optim, manifest_for(start_epoch));
    result.last_checkpoint = last_path;
    result.best_checkpoint = fs::exists(best_path) ? best_path : last_path;
    return result;
  }

  for (int64_t epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
    model->train();
    std::vector<double> epoch_losses;
    auto batches = make_batches(fit, cfg.train.batch_size, cfg.train.seed, epoch);
    for (const auto& ids : batches) {
      auto [images, targets] =
          assemble_batch(fit, ids, cfg.train.input_height, cfg.train.input_width);
      auto outputs = model->forward(images, /*with_supplementary=*/true);
      auto loss = total_loss(outputs, targets, cfg.loss);

      if (!std::isfinite(loss.breakdown.total)) {
        // Keep the last good checkpoint and refuse to continue.
        throw Diverged("non-finite total loss at step " + std::to_string(global_step) +
                       "; last good checkpoint: " +
                       (result.last_checkpoint.empty() ? "(none)"
                                                       : result.last_checkpoint.string()));
      }

      optim->zero_grad();
      loss.total.backward();
      optim->step();

      const auto& b = loss.breakdown;
      step_log << global_step << ',' << b.focal << ',' << b.ssim << ',' << b.iou << ','
               << b.primary << ',' << b.supplementary[0] << ',' << b.supplementary[1] << ','
               << b.supplementary[2] << ',' << b.supplementary[3] << ',' << b.total << '\n';
      epoch_losses.push_back(b.total);
      if (result.first_step_losses.size() < 2) {
        result.first_step_losses.push_back(b.total);
      }
      ++global_step;
      ++result.steps;
    }
    step_log.flush();
    result.epoch_median_loss.push_back(median(epoch_losses));
    ++result.epochs_run;

    if (!val.empty()) {
      auto report = evaluate_dataset(model, val, cfg);
      if (report.iou > result.best_val_iou) {
        result.best_val_iou = report.iou;
        save_training_checkpoint(best_path, model, *optim, manifest_for(epoch + 1));
        result.best_checkpoint = best_path;
      }
    }
    if ((epoch + 1) % cfg.train.checkpoint_every == 0 || epoch + 1 == cfg.train.epochs) {
      fs::path p = run_dir / checkpoint_name(epoch + 1);
      save_training_checkpoint(p, model, *optim, manifest_for(epoch + 1));
      result.last_checkpoint = p;
    }
  }

  save_training_checkpoint(last_path, model, *optim, manifest_for(cfg.train.epochs));
  result.last_checkpoint = last_path;
  if (result.best_checkpoint.empty()) {
    result.best_checkpoint = last_path;
  }
  return result;
}

MetricReport evaluate_dataset(FusionLungNet& model, const DatasetIndex& index,
                              const RunConfig& cfg,
                              std::vector<std::pair<std::string, MetricReport>>* per_image) {
  torch::NoGradGuard guard;
  bool was_training = model->is_training();
  model->eval();

  ConfusionCounts totals;
  double macro_iou = 0, macro_f1 = 0, macro_prec = 0, macro_rec = 0, macro_acc = 0, macro_mcc = 0;
  for (const auto& entry : index.entries) {
    auto [img, mask] = load_training_pair(entry, cfg.train.input_height, cfg.train.input_width);
    auto primary = model->forward(img.unsqueeze(0), /*with_supplementary=*/false).primary;
    auto counts = confusion(primary.squeeze(0).squeeze(0), mask.squeeze(0), cfg.eval.threshold);
    totals += counts;
    auto report = compute_metrics(counts, cfg.eval.threshold);
    if (per_image) per_image->emplace_back(entry.id, report);
    macro_iou += report.iou;
    macro_f1 += report.f1;
    macro_prec += report.precision;
    macro_rec += report.recall;
    macro_acc += report.accuracy;
    macro_mcc += report.mcc;
  }
  model->train(was_training);

  MetricReport report = compute_metrics(totals, cfg.eval.threshold);
  if (cfg.eval.macro && !index.empty()) {
    const double n = static_cast<double>(index.size());
    report.iou = macro_iou / n;
    report.f1 = macro_f1 / n;
    report.precision = macro_prec / n;
    report.recall = macro_rec / n;
    report.accuracy = macro_acc / n;
    report.mcc = macro_mcc / n;
  }
  return report;
}

std::vector<AblationFlags> default_ablation_grid() {
  return {
      {false, false, false},  // baseline
      {true, false, false},   // + MFF
      {false, false, true},   // + RRM
      {true, true, false},    // + MFF + SR
      {true, true, true},     // full model
  };
}

namespace {

SweepRow run_row(const RunConfig& cfg, const std::string& label, const DatasetIndex& train_index,
                 const DatasetIndex& test_index, const fs::path& row_dir) {
  SweepRow row;
  row.label = label;
  try {
    TrainResult tr = train(cfg, train_index, row_dir);
    auto model = load_model_checkpoint(cfg, tr.best_checkpoint);
    row.report = evaluate_dataset(model, test_index, cfg);
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

std::string format_triple(const std::array<double, 3>& l) {
  std::ostringstream os;
  os << "lambda=(" << l[0] << "," << l[1] << "," << l[2] << ")";
  return os.str();
}

}  // namespace

std::vector<SweepRow> ablate(const RunConfig& base, const DatasetIndex& train_index,
                             const DatasetIndex& test_index,
                             const std::vector<AblationFlags>& grid, const fs::path& work_dir) {
  std::vector<SweepRow> rows;
  int i = 0;
  for (const auto& flags : grid) {
    RunConfig cfg = base;
    cfg.model.ablation = flags;
    rows.push_back(run_row(cfg, flags.label(), train_index, test_index,
                           work_dir / ("ablation-" + std::to_string(i++))));
  }
  return rows;
}

std::vector<SweepRow> sweep_lambda(const RunConfig& base, const DatasetIndex& train_index,
                                   const DatasetIndex& test_index,
                                   const std::vector<std::array<double, 3>>& rows_in,
                                   const fs::path& work_dir) {
  std::vector<SweepRow> rows;
  int i = 0;
  for (const auto& l : rows_in) {
    RunConfig cfg = base;
    cfg.loss.lambda1 = l[0];
    cfg.loss.lambda2 = l[1];
    cfg.loss.lambda3 = l[2];
    rows.push_back(run_row(cfg, format_triple(l), train_index, test_index,
                           work_dir / ("lambda-" + std::to_string(i++))));
  }
  return rows;
}

std::vector<SweepRow> sweep_input_size(const RunConfig& base, const DatasetIndex& train_index,
                                       const DatasetIndex& test_index,
                                       const std::vector<int>& sizes, const fs::path& work_dir) {
  std::vector<SweepRow> rows;
  for (int size : sizes) {
    RunConfig cfg = base;
    cfg.train.input_height = size;
    cfg.train.input_width = size;
    rows.push_back(run_row(cfg, std::to_string(size) + "x" + std::to_string(size), train_index,
                           test_index, work_dir / ("size-" + std::to_string(size))));
  }
  return rows;
}

std::vector<SweepRow> sweep_optimizer(const RunConfig& base, const DatasetIndex& train_index,
                                      const DatasetIndex& test_index,
                                      const std::vector<OptimizerKind>& optimizers,
                                      const fs::path& work_dir) {
  std::vector<SweepRow> rows;
  for (auto kind : optimizers) {
    RunConfig cfg = base;
    cfg.train.optimizer = kind;
    rows.push_back(
        run_row(cfg, to_string(kind), train_index, test_index, work_dir / to_string(kind)));
  }
  return rows;
}

std::vector<SweepRow> sweep_losses(const RunConfig& base, const DatasetIndex& train_index,
                                   const DatasetIndex& test_index,
                                   const std::vector<std::string>& combos,
                                   const fs::path& work_dir) {
  std::vector<SweepRow> rows;
  int i = 0;
  for (const auto& combo : combos) {
    RunConfig cfg = base;
    bool focal = combo.find("focal") != std::string::npos;
    bool ssim = combo.find("ssim") != std::string::npos;
    bool iou = combo.find("iou") != std::string::npos;
    if (!focal && !ssim && !iou) {
      throw ConfigError("loss combo '" + combo + "' names none of focal/ssim/iou");
    }
    if (!focal) cfg.loss.lambda1 = 0.0;
    if (!ssim) cfg.loss.lambda2 = 0.0;
    if (!iou) cfg.loss.lambda3 = 0.0;
    rows.push_back(
        run_row(cfg, combo, train_index, test_index, work_dir / ("loss-" + std::to_string(i++))));
  }
  return rows;
}

void write_sweep_outputs(const fs::path& dir, const std::string& name,
                         const std::vector<SweepRow>& rows) {
  fs::create_directories(dir);
  std::ofstream csv(dir / (name + ".csv"));
  csv << "label,iou,f1,precision,recall,acc,mcc,failed,error\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    csv << '"' << row.label << "\"," << r.iou << ',' << r.f1 << ',' << r.precision << ','
        << r.recall << ',' << r.accuracy << ',' << r.mcc << ',' << (row.failed ? 1 : 0) << ",\""
        << row.error << "\"\n";
  }

  std::ofstream txt(dir / (name + ".txt"));
  txt << metric_table_header("Method") << "\n";
  for (const auto& row : rows) {
    if (row.failed) {
      txt << row.label << "  FAILED: " << row.error << "\n";
    } else {
      txt << format_metric_row(row.report, row.label) << "\n";
    }
  }
}

}  // namespace fusionlung

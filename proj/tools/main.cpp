#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "fusionlung/config.hpp"
#include "fusionlung/dataset.hpp"
#include "fusionlung/errors.hpp"
#include "fusionlung/metrics.hpp"
#include "fusionlung/preprocess.hpp"
#include "fusionlung/rundir.hpp"
#include "fusionlung/synthetic.hpp"
#include "fusionlung/train.hpp"

namespace fs = std::filesystem;
using namespace fusionlung;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

RunConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) {
    throw ConfigError("missing --config");
  }
  return load_run_config(args.config_path, args.overrides);
}

fs::path resolve_run_dir(const std::string& name) {
  fs::path p(name);
  return p.is_absolute() ? p : runs_root() / p;
}

RunManifest start_manifest(const std::string& command, const CommonArgs& args, uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.config_path = args.config_path;
  if (!args.config_path.empty()) {
    m.config_hash = sha256_file(args.config_path);
  }
  m.seed = seed;
  m.version = kVersion;
  m.started = iso8601_now();
  return m;
}

std::pair<DatasetIndex, DatasetIndex> load_and_split(const RunConfig& cfg) {
  if (cfg.dataset.root.empty()) {
    throw ConfigError("dataset.root is not set");
  }
  auto index = scan_dataset(cfg.dataset.root);
  return split_dataset(index, cfg.dataset.test_count, cfg.dataset.split_seed);
}

int cmd_preprocess(const std::string& in_dir, const std::string& out_dir, const CommonArgs& args,
                   bool dump_stages) {
  RunConfig cfg = args.config_path.empty()
                      ? run_config_from_json(nlohmann::json::object())
                      : load_run_config(args.config_path, args.overrides);
  cfg.preprocess.validate();

  auto index = scan_dataset(in_dir);
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "masks");

  nlohmann::json failures = nlohmann::json::array();
  nlohmann::json degenerate = nlohmann::json::array();
  size_t written = 0;
  for (const auto& entry : index.entries) {
    try {
      auto raw = read_image(entry.image_path);
      auto stages = preprocess_stages(raw, cfg.preprocess);
      write_gray_png16(fs::path(out_dir) / "images" / (entry.id + ".png"), stages.body);

      auto mask = read_mask(entry.mask_path);
      mask = resize_mask(mask, cfg.preprocess.target_height, cfg.preprocess.target_width);
      write_mask_png(fs::path(out_dir) / "masks" / (entry.id + ".png"), mask);

      if (stages.degenerate) degenerate.push_back(entry.id);
      if (dump_stages) {
        fs::path dumps = fs::path(out_dir) / "stages";
        fs::create_directories(dumps);
        write_gray_png8(dumps / (entry.id + ".resize.png"), stages.resized);
        write_gray_png8(dumps / (entry.id + ".median.png"), stages.median);
        write_gray_png8(dumps / (entry.id + ".enh.png"), stages.enhanced);
        write_gray_png8(dumps / (entry.id + ".body.png"), stages.body);
      }
      ++written;
    } catch (const std::exception& e) {
      failures.push_back({{"id", entry.id}, {"error", e.what()}});
    }
  }

  nlohmann::json report{{"total", index.size()},
                        {"written", written},
                        {"failures", failures},
                        {"degenerate_warnings", degenerate}};
  std::ofstream(fs::path(out_dir) / "report.json") << report.dump(2) << "\n";
  std::cout << "processed " << written << "/" << index.size() << " images";
  if (!degenerate.empty()) std::cout << " (" << degenerate.size() << " degenerate warnings)";
  std::cout << "\n";
  if (!failures.empty()) {
    std::cerr << failures.size() << " failures; see report.json\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_train(const CommonArgs& args, const std::string& run_name, const std::string& resume) {
  auto cfg = load_config(args);
  fs::path run_dir = resolve_run_dir(run_name);
  RunLock lock(run_dir);
  auto manifest = start_manifest("train", args, cfg.train.seed);

  auto [train_idx, test_idx] = load_and_split(cfg);
  write_split_manifest(run_dir / "train.txt", train_idx);
  write_split_manifest(run_dir / "test.txt", test_idx);
  std::ofstream(run_dir / "config.json") << to_json(cfg).dump(2) << "\n";

  std::optional<fs::path> resume_path;
  if (!resume.empty()) resume_path = fs::path(resume);

  auto result = train(cfg, train_idx, run_dir, resume_path);
  manifest.finished = iso8601_now();
  write_run_manifest(run_dir, manifest);

  std::cout << "trained " << result.epochs_run << " epochs (" << result.steps << " steps), "
            << "best val IoU " << result.best_val_iou << "\n"
            << "last checkpoint: " << result.last_checkpoint.string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint, const std::string& split,
             const std::string& out_dir) {
  auto cfg = load_config(args);
  if (!fs::exists(checkpoint)) {
    throw ConfigError("checkpoint not found: " + checkpoint);
  }
  if (!fs::exists(split)) {
    throw ConfigError("split manifest not found: " + split);
  }
  auto full = scan_dataset(cfg.dataset.root);
  auto index = load_split_manifest(split, full);

  auto model = load_model_checkpoint(cfg, checkpoint);
  std::vector<std::pair<std::string, MetricReport>> per_image;
  auto report = evaluate_dataset(model, index, cfg, &per_image);

  fs::path out = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(out);
  write_metrics_json(out / "metrics.json", report, sha256_file(checkpoint), sha256_file(split));
  {
    std::ofstream csv(out / "per_image.csv");
    csv << "id,iou,f1,precision,recall,acc,mcc,tp,fp,fn,tn\n";
    for (const auto& [id, r] : per_image) {
      csv << id << ',' << r.iou << ',' << r.f1 << ',' << r.precision << ',' << r.recall << ','
          << r.accuracy << ',' << r.mcc << ',' << r.counts.tp << ',' << r.counts.fp << ','
          << r.counts.fn << ',' << r.counts.tn << '\n';
    }
  }

  std::cout << metric_table_header() << "\n" << format_metric_row(report) << "\n";
  return kExitOk;
}

int cmd_predict(const CommonArgs& args, const std::string& checkpoint, const std::string& image,
                const std::string& out_path, bool prob) {
  auto cfg = load_config(args);
  if (!fs::exists(checkpoint)) {
    throw ConfigError("checkpoint not found: " + checkpoint);
  }
  auto raw = read_image(image);
  auto pre = preprocess(raw, cfg.preprocess);

  auto model = load_model_checkpoint(cfg, checkpoint);
  auto input = torch::from_blob(pre.image.pixels.data(), {pre.image.height, pre.image.width},
                                torch::kFloat32)
                   .clone()
                   .unsqueeze(0)
                   .repeat({3, 1, 1})
                   .unsqueeze(0);
  auto primary = model->predict(input).squeeze(0).squeeze(0).contiguous();

  // back to the original resolution
  GrayImage prob_map(static_cast<int>(primary.size(0)), static_cast<int>(primary.size(1)));
  std::memcpy(prob_map.pixels.data(), primary.data_ptr<float>(),
              prob_map.pixels.size() * sizeof(float));
  prob_map = resize_unit(prob_map, raw.height, raw.width);

  if (prob) {
    write_gray_png8(out_path, prob_map);
  } else {
    BinaryMask mask(prob_map.height, prob_map.width);
    for (size_t i = 0; i < prob_map.pixels.size(); ++i) {
      mask.pixels[i] = prob_map.pixels[i] >= cfg.eval.threshold ? 1 : 0;
    }
    write_mask_png(out_path, mask);
  }
  std::cout << "wrote " << out_path << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonArgs& args, const std::string& kind, const std::string& run_name) {
  auto cfg = load_config(args);
  fs::path work_dir = resolve_run_dir(run_name.empty() ? "sweep-" + kind : run_name);
  RunLock lock(work_dir);
  auto manifest = start_manifest("sweep " + kind, args, cfg.train.seed);

  auto [train_idx, test_idx] = load_and_split(cfg);
  write_split_manifest(work_dir / "train.txt", train_idx);
  write_split_manifest(work_dir / "test.txt", test_idx);

  std::vector<SweepRow> rows;
  if (kind == "ablation") {
    rows = ablate(cfg, train_idx, test_idx, default_ablation_grid(), work_dir);
  } else if (kind == "lambda") {
    rows = sweep_lambda(cfg, train_idx, test_idx,
                        {{0.3, 0.4, 0.3}, {0.4, 0.3, 0.3}, {0.3, 0.3, 0.4}}, work_dir);
  } else if (kind == "input-size") {
    rows = sweep_input_size(cfg, train_idx, test_idx, {160, 320, 640}, work_dir);
  } else if (kind == "optimizer") {
    rows = sweep_optimizer(cfg, train_idx, test_idx,
                           {OptimizerKind::sgd, OptimizerKind::adamax, OptimizerKind::rmsprop,
                            OptimizerKind::adam},
                           work_dir);
  } else if (kind == "losses") {
    rows = sweep_losses(cfg, train_idx, test_idx, {"focal", "iou", "focal+iou", "focal+ssim+iou"},
                        work_dir);
  } else {
    throw ConfigError("unknown sweep kind '" + kind +
                      "' (lambda|input-size|optimizer|losses|ablation)");
  }

  write_sweep_outputs(work_dir, kind, rows);
  manifest.finished = iso8601_now();
  write_run_manifest(work_dir, manifest);

  std::cout << metric_table_header("Method") << "\n";
  for (const auto& row : rows) {
    if (row.failed) {
      std::cout << row.label << "  FAILED: " << row.error << "\n";
    } else {
      std::cout << format_metric_row(row.report, row.label) << "\n";
    }
  }
  std::cout << "tables written to " << work_dir.string() << "\n";
  return kExitOk;
}

int cmd_synth(const std::string& out_dir, int count, int size, uint64_t seed) {
  SynthConfig cfg;
  cfg.count = count;
  cfg.height = size;
  cfg.width = size;
  cfg.seed = seed;
  generate_ellipse_dataset(out_dir, cfg);
  std::cout << "wrote " << count << " synthetic pairs to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FusionLungNet: lung CT segmentation training and evaluation"};
  app.require_subcommand(1);

  CommonArgs common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file");
    sub->add_option("--set", common.overrides,
                    "config override as path.to.key=value (repeatable)");
  };

  std::string in_dir, out_dir;
  bool dump_stages = false;
  auto* pre = app.add_subcommand("preprocess", "Run the preprocessing pipeline over a dataset");
  pre->add_option("input", in_dir, "dataset root (images/ + masks/)")->required();
  pre->add_option("output", out_dir, "output directory")->required();
  pre->add_flag("--dump-stages", dump_stages, "write per-stage PNGs");
  add_common(pre);

  std::string run_name = "run";
  std::string resume;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--run", run_name, "run directory name (under FUSIONLUNG_RUNS_DIR or ./runs)");
  tr->add_option("--resume", resume, "checkpoint to resume from");
  add_common(tr);

  std::string checkpoint, split, eval_out;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a split manifest");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--split", split, "split manifest (one id per line)")->required();
  ev->add_option("--out", eval_out, "output directory for metrics.json / per_image.csv");
  add_common(ev);

  std::string image, pred_out;
  bool prob = false;
  auto* pr = app.add_subcommand("predict", "Segment a single image");
  pr->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  pr->add_option("--image", image, "input image (PNG/JPG)")->required();
  pr->add_option("--out", pred_out, "output PNG path")->required();
  pr->add_flag("--prob", prob, "write the probability map instead of the binary mask");
  add_common(pr);

  std::string kind;
  auto* sw =
      app.add_subcommand("sweep", "Run a sweep (lambda|input-size|optimizer|losses|ablation)");
  sw->add_option("kind", kind, "sweep kind")->required();
  sw->add_option("--run", run_name, "work directory name");
  add_common(sw);

  std::string synth_out;
  int synth_count = 240, synth_size = 160;
  uint64_t synth_seed = 7;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic ellipse dataset");
  sy->add_option("output", synth_out, "output dataset root")->required();
  sy->add_option("--count", synth_count, "number of image/mask pairs");
  sy->add_option("--size", synth_size, "image side length");
  sy->add_option("--seed", synth_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (pre->parsed()) return cmd_preprocess(in_dir, out_dir, common, dump_stages);
    if (tr->parsed()) return cmd_train(common, run_name, resume);
    if (ev->parsed()) return cmd_eval(common, checkpoint, split, eval_out);
    if (pr->parsed()) return cmd_predict(common, checkpoint, image, pred_out, prob);
    if (sw->parsed()) return cmd_sweep(common, kind, run_name);
    if (sy->parsed()) return cmd_synth(synth_out, synth_count, synth_size, synth_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

#include <fstream>

#include "fusionlung/optim.hpp"
#include "fusionlung/synthetic.hpp"
#include "fusionlung/train.hpp"
#include "oracles.hpp"

#ifdef CHECK
#undef CHECK  // torch's c10 logging also claims this name
#endif
#include <doctest.h>

using namespace fusionlung;
namespace fs = std::filesystem;

namespace {

RunConfig toy_config(const fs::path& data_root) {
  RunConfig cfg;
  cfg.dataset.root = data_root.string();
  cfg.model = ModelConfig::tiny_test({8, 8, 8, 8}, 4, 4, 4);
  cfg.train.epochs = 1;
  cfg.train.batch_size = 8;
  cfg.train.learning_rate = 1e-3;
  cfg.train.input_height = 32;
  cfg.train.input_width = 32;
  cfg.train.seed = 7;
  cfg.train.val_fraction = 0.1;
  cfg.loss.ssim_window = 7;
  return cfg;
}

DatasetIndex toy_dataset(const fs::path& root, int count = 12) {
  SynthConfig synth;
  synth.count = count;
  synth.height = 32;
  synth.width = 32;
  synth.seed = 3;
  generate_ellipse_dataset(root, synth);
  return scan_dataset(root);
}

}  // namespace

TEST_CASE("every optimizer kind updates parameters when gradients are nonzero") {
  for (auto kind : {OptimizerKind::adam, OptimizerKind::adamax, OptimizerKind::rmsprop,
                    OptimizerKind::sgd}) {
    torch::manual_seed(60);
    auto p = torch::randn({4, 4}).set_requires_grad(true);
    auto before = p.detach().clone();
    auto opt = make_optimizer(kind, {p}, 1e-2);
    auto loss = (p * p).sum();
    opt->zero_grad();
    loss.backward();
    REQUIRE(p.grad().abs().sum().item<double>() > 0);
    opt->step();
    INFO("optimizer " << to_string(kind));
    CHECK_FALSE(torch::equal(p.detach(), before));
  }
}

TEST_CASE("optimizer state round-trips through named tensors") {
  torch::manual_seed(61);
  auto p1 = torch::randn({3}).set_requires_grad(true);
  auto p2 = p1.detach().clone().set_requires_grad(true);

  auto run_steps = [](Optimizer& opt, torch::Tensor& p, int n) {
    for (int i = 0; i < n; ++i) {
      auto loss = (p * p).sum();
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
  };

  auto opt1 = make_optimizer(OptimizerKind::adam, {p1}, 1e-2);
  run_steps(*opt1, p1, 3);

  auto opt2 = make_optimizer(OptimizerKind::adam, {p2}, 1e-2);
  run_steps(*opt2, p2, 2);
  // snapshot after two steps, reload, and replay the third
  auto opt3 = make_optimizer(OptimizerKind::adam, {p2}, 1e-2);
  opt3->load_state(opt2->state());
  run_steps(*opt3, p2, 1);

  CHECK(torch::allclose(p1.detach(), p2.detach(), 1e-12, 1e-12));
}

TEST_CASE("train with zero epochs writes an initial checkpoint and takes no steps") {
  oracles::TempDir data("fltr-data");
  oracles::TempDir run("fltr-run");
  auto index = toy_dataset(data.path());
  auto cfg = toy_config(data.path());
  cfg.train.epochs = 0;

  auto res = train(cfg, index, run.path());
  CHECK(res.steps == 0);
  CHECK(res.epochs_run == 0);
  CHECK(fs::exists(res.last_checkpoint));
}

TEST_CASE("identical config and seed reproduce the first step losses") {
  oracles::TempDir data("fltr-data");
  auto index = toy_dataset(data.path());
  auto cfg = toy_config(data.path());

  oracles::TempDir run1("fltr-run1");
  oracles::TempDir run2("fltr-run2");
  auto r1 = train(cfg, index, run1.path());
  auto r2 = train(cfg, index, run2.path());
  REQUIRE(r1.first_step_losses.size() >= 2);
  REQUIRE(r2.first_step_losses.size() >= 2);
  CHECK(r1.first_step_losses[0] == r2.first_step_losses[0]);
  CHECK(r1.first_step_losses[1] == r2.first_step_losses[1]);
}

TEST_CASE("training writes a step log with the documented columns") {
  oracles::TempDir data("fltr-data");
  oracles::TempDir run("fltr-run");
  auto index = toy_dataset(data.path());
  auto cfg = toy_config(data.path());
  auto res = train(cfg, index, run.path());
  CHECK(res.steps > 0);

  std::ifstream log(run.path() / "steps.csv");
  REQUIRE(log.good());
  std::string header;
  std::getline(log, header);
  CHECK(header == "step,focal,ssim,iou,primary,sup1,sup2,sup3,sup4,total");
  std::string first;
  std::getline(log, first);
  CHECK_FALSE(first.empty());
}

TEST_CASE("checkpoint save/load preserves evaluation exactly") {
  oracles::TempDir data("fltr-data");
  oracles::TempDir run("fltr-run");
  auto index = toy_dataset(data.path());
  auto cfg = toy_config(data.path());

  auto res = train(cfg, index, run.path());
  REQUIRE(res.model);
  auto before = evaluate_dataset(res.model, index, cfg);

  auto loaded = load_model_checkpoint(cfg, res.last_checkpoint);
  auto after = evaluate_dataset(loaded, index, cfg);
  CHECK(before.counts == after.counts);
  CHECK(before.iou == after.iou);
  CHECK(before.mcc == after.mcc);
}

TEST_CASE("resume continues the loss trajectory") {
  oracles::TempDir data("fltr-data");
  auto index = toy_dataset(data.path());

  auto cfg2 = toy_config(data.path());
  cfg2.train.epochs = 2;
  oracles::TempDir run_full("fltr-full");
  auto full = train(cfg2, index, run_full.path());

  auto cfg1 = toy_config(data.path());
  cfg1.train.epochs = 1;
  oracles::TempDir run_half("fltr-half");
  auto half = train(cfg1, index, run_half.path());

  oracles::TempDir run_resumed("fltr-resumed");
  auto resumed = train(cfg2, index, run_resumed.path(), half.last_checkpoint);
  CHECK(resumed.epochs_run == 1);  // picked up after the stored epoch

  auto full_eval = evaluate_dataset(full.model, index, cfg2);
  auto resumed_eval = evaluate_dataset(resumed.model, index, cfg2);
  CHECK(full_eval.counts == resumed_eval.counts);
}

TEST_CASE("non-finite loss aborts with Diverged and keeps the last checkpoint") {
  oracles::TempDir data("fltr-data");
  auto index = toy_dataset(data.path());

  oracles::TempDir run_good("fltr-good");
  auto cfg = toy_config(data.path());
  auto good = train(cfg, index, run_good.path());
  REQUIRE(fs::exists(good.last_checkpoint));

  auto bad = toy_config(data.path());
  bad.train.epochs = 4;
  bad.train.learning_rate = 1e30;
  oracles::TempDir run_bad("fltr-bad");
  CHECK_THROWS_AS(train(bad, index, run_bad.path(), good.last_checkpoint), Diverged);
  CHECK(fs::exists(good.last_checkpoint));  // retained
}

TEST_CASE("evaluation micro-averages confusion counts") {
  oracles::TempDir data("fltr-data");
  oracles::TempDir run("fltr-run");
  auto index = toy_dataset(data.path(), 6);
  auto cfg = toy_config(data.path());
  cfg.train.epochs = 0;
  auto res = train(cfg, index, run.path());

  std::vector<std::pair<std::string, MetricReport>> per_image;
  auto report = evaluate_dataset(res.model, index, cfg, &per_image);
  REQUIRE(per_image.size() == index.size());
  ConfusionCounts sum;
  for (const auto& [id, r] : per_image) sum += r.counts;
  CHECK(report.counts == sum);

  auto direct = compute_metrics(sum, cfg.eval.threshold);
  CHECK(report.iou == direct.iou);
  CHECK(report.mcc == direct.mcc);
}

TEST_CASE("ablate emits one row per configuration and keeps row order") {
  oracles::TempDir data("fltr-data");
  oracles::TempDir work("fltr-work");
  auto index = toy_dataset(data.path());
  auto [train_idx, test_idx] = split_dataset(index, 3, 5);
  auto cfg = toy_config(data.path());

  auto rows = ablate(cfg, train_idx, test_idx, {AblationFlags{false, false, false}},
                     work.path());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label == "baseline");
  CHECK_FALSE(rows[0].failed);
  CHECK(rows[0].report.iou >= 0.0);

  auto grid = default_ablation_grid();
  REQUIRE(grid.size() == 5);
  CHECK(grid[0].label() == "baseline");
  CHECK(grid[1].label() == "baseline+MFF");
  CHECK(grid[2].label() == "baseline+RRM");
  CHECK(grid[3].label() == "baseline+MFF+SR");
  CHECK(grid[4].label() == "baseline+MFF+SR+RRM");
}

TEST_CASE("sweep tables are written as csv and aligned text") {
  oracles::TempDir data("fltr-data");
  oracles::TempDir out("fltr-out");
  std::vector<SweepRow> rows(2);
  rows[0].label = "row-a";
  rows[0].report = compute_metrics({10, 1, 2, 20});
  rows[1].label = "row-b";
  rows[1].failed = true;
  rows[1].error = "boom";
  write_sweep_outputs(out.path(), "demo", rows);

  std::ifstream csv(out.path() / "demo.csv");
  REQUIRE(csv.good());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "label,iou,f1,precision,recall,acc,mcc,failed,error");

  std::ifstream txt(out.path() / "demo.txt");
  REQUIRE(txt.good());
  std::getline(txt, line);
  CHECK(line.find("IoU") != std::string::npos);
}

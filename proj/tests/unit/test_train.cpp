// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "hybridct/core/error.hpp"
#include "hybridct/nn/resnet3d.hpp"
#include "hybridct/nn/vit.hpp"
#include "hybridct/train/trainer.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace hybridct;
using namespace hybridct::train;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hybridct_train_" + name);
  std::filesystem::remove_all(p);
  return p;
}

const Dataset& tiny_data() {
  static const Dataset d = [] {
    synth::SynthSpec s;
    s.n_scans_per_class_per_source = 4;
    s.n_sources = 2;
    s.volume_side = 16;
    s.val_per_cell = 1;
    s.seed = 5;
    preprocess::PreprocCfg p;
    p.target_side = 16;
    return testing::synthetic_dataset(s, p);
  }();
  return d;
}

nn::Model3DCfg tiny3d() {
  nn::Model3DCfg c;
  c.width_multiplier = 0.25;
  c.input_side = 16;
  c.projection_dim = 8;
  return c;
}

nn::Encoder25DCfg tiny25d() {
  nn::Encoder25DCfg c;
  c.slice_size = 32;
  c.k_slices = 2;
  c.depth = 2;
  c.embedding_dim = 16;
  c.n_heads = 2;
  c.projection_dim = 16;
  return c;
}

TrainCfg cfg3d(int epochs_a = 1, int epochs_b = 1) {
  TrainCfg c;
  c.plans = plan_3d();
  c.plans[0].epochs = epochs_a;
  c.plans[1].epochs = epochs_b;
  c.batch_size = 4;
  c.seed = 3;
  return c;
}

TrainCfg cfg25d() {
  TrainCfg c;
  c.plans = plan_25d();
  for (auto& p : c.plans) p.epochs = 1;
  c.batch_size = 4;
  c.seed = 3;
  return c;
}

std::vector<json> read_log(const std::filesystem::path& p) {
  std::vector<json> out;
  std::ifstream is(p);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("default plans carry the published constants") {
  const auto p3 = plan_3d();
  REQUIRE(p3.size() == 2);
  CHECK(p3[0].epochs == 5);
  CHECK(p3[0].base_lr == 1e-4);
  CHECK(p3[0].losses == LossKind::vrex);
  CHECK(p3[1].epochs == 20);
  CHECK(p3[1].base_lr == 1e-5);
  CHECK(p3[1].weight_decay == 1e-5);
  CHECK(p3[1].schedule == Schedule::cosine);
  CHECK(p3[1].losses == LossKind::ce_supcon_mixup);

  const auto p25 = plan_25d();
  REQUIRE(p25.size() == 3);
  const int ep[] = {10, 15, 20};
  const double lr[] = {1e-3, 1e-4, 5e-5};
  for (int i = 0; i < 3; ++i) {
    CHECK(p25[i].epochs == ep[i]);
    CHECK(p25[i].base_lr == lr[i]);
    CHECK(p25[i].warmup_frac == 0.05);
    CHECK(p25[i].trainability_stage == i + 1);
  }
}

TEST_CASE("epoch scaling") {
  const auto s3 = scale_epochs(plan_3d(), 0.2);
  CHECK(s3[0].epochs == 1);
  CHECK(s3[1].epochs == 4);
  CHECK(s3[0].base_lr == 1e-4);
  const auto s25 = scale_epochs(plan_25d(), 0.2);
  CHECK(s25[0].epochs == 2);
  CHECK(s25[1].epochs == 3);
  CHECK(s25[2].epochs == 4);
  CHECK(scale_epochs(plan_3d(), 0.01)[0].epochs == 1);
}

TEST_CASE("learning-rate schedule endpoints") {
  const long total = 200;
  const double base = 1e-3;
  const long warm = std::lround(0.05 * total);
  CHECK(lr_at(0, total, base, 0.05) == 0.0);
  CHECK(lr_at(warm / 2, total, base, 0.05) == doctest::Approx(base * (warm / 2) / warm));
  CHECK(lr_at(warm, total, base, 0.05) == base);
  CHECK(lr_at(total, total, base, 0.05) == doctest::Approx(0.0).epsilon(1e-18));
  const long mid = warm + (total - warm) / 2;
  CHECK(lr_at(mid, total, base, 0.05) == doctest::Approx(base / 2).epsilon(1e-12));
  CHECK(lr_at(0, total, base, 0.0) == base);
  StagePlan constant;
  constant.schedule = Schedule::constant;
  constant.base_lr = 2e-4;
  CHECK(lr_for(constant, 150, 200) == 2e-4);
}

TEST_CASE("stage validation rejects warmup of one half") {
  StagePlan p;
  p.warmup_frac = 0.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  TrainCfg c = cfg3d();
  c.plans[1].warmup_frac = 0.6;
  nn::ResNet3d m(tiny3d(), 1);
  CHECK_THROWS_AS(train_branch(m, tiny_data(), c), ValidationError);
}

TEST_CASE("augmentation: identity config, flip semantics, determinism") {
  const int S = 8;
  std::vector<float> img(S * S);
  for (int i = 0; i < S * S; ++i) img[i] = static_cast<float>(i);
  Rng rng(1);
  const AugCfg none = AugCfg::none();
  for (int t = 0; t < 5; ++t) {
    auto copy = img;
    augment_image(copy.data(), S, draw_params(none, S, rng), rng);
    CHECK(copy == img);
  }

  std::vector<float> dot(S * S, 0.0f);
  dot[2 * S + 1] = 200.0f;
  AugParams flip;
  flip.flip = true;
  augment_image(dot.data(), S, flip, rng);
  CHECK(dot[2 * S + (S - 1 - 1)] == 200.0f);
  CHECK(dot[2 * S + 1] == 0.0f);

  Volume v(8, 8, 8);
  for (std::size_t i = 0; i < v.voxels(); ++i) v.data[i] = static_cast<float>(i % 251);
  Volume a = v, b = v;
  Rng r1(9), r2(9);
  augment(a, AugCfg{}, r1);
  augment(b, AugCfg{}, r2);
  CHECK(a.data == b.data);
  for (float x : a.data) {
    CHECK(x >= 0.0f);
    CHECK(x <= 255.0f);
  }
}

TEST_CASE("one epoch writes a log and checkpoints") {
  const auto dir = scratch("smoke");
  TrainCfg c = cfg3d();
  c.run_dir = dir;
  c.stop_after_epochs = 1;
  nn::ResNet3d m(tiny3d(), 1);
  const auto st = train_branch(m, tiny_data(), c);
  CHECK(st.history.size() == 1);
  CHECK(std::filesystem::exists(dir / "last.ckpt"));
  CHECK(std::filesystem::exists(dir / "best.ckpt"));
  CHECK(std::filesystem::exists(dir / "log.jsonl"));
  for (double l : st.loss_history) CHECK(std::isfinite(l));
  std::filesystem::remove_all(dir);
}

TEST_CASE("logged learning rates follow lr_at and VREx batches mix domains") {
  const auto dir = scratch("lrlog");
  TrainCfg c = cfg25d();
  c.run_dir = dir;
  nn::MultiViewModel m(tiny25d(), 2);
  train_branch(m, tiny_data(), c);
  int steps = 0;
  const long per_epoch = (12 + 3) / 4;
  for (const auto& r : read_log(dir / "log.jsonl")) {
    if (r["type"] != "step") continue;
    const int s = r["stage"].get<int>();
    const auto& plan = c.plans[s];
    const double want = lr_for(plan, r["step"].get<long>(), per_epoch * plan.epochs);
    CHECK(r["lr"].get<double>() == want);
    ++steps;
  }
  CHECK(steps == 3 * per_epoch);
  std::filesystem::remove_all(dir);

  const auto dir3 = scratch("strat");
  TrainCfg c3 = cfg3d(2, 1);
  c3.run_dir = dir3;
  nn::ResNet3d m3(tiny3d(), 1);
  train_branch(m3, tiny_data(), c3);
  int vrex_steps = 0;
  for (const auto& r : read_log(dir3 / "log.jsonl"))
    if (r["type"] == "step" && r["stage"] == 0) {
      CHECK(r["batch_domains"].size() >= 2);
      ++vrex_steps;
    }
  CHECK(vrex_steps == 2 * per_epoch);
  std::filesystem::remove_all(dir3);
}

TEST_CASE("fixed seed gives identical loss curves") {
  TrainCfg c = cfg3d();
  nn::ResNet3d a(tiny3d(), 1), b(tiny3d(), 1);
  const auto sa = train_branch(a, tiny_data(), c);
  const auto sb = train_branch(b, tiny_data(), c);
  CHECK(sa.loss_history == sb.loss_history);
  CHECK(parameter_checksum(a.parameters()) == parameter_checksum(b.parameters()));
}

TEST_CASE("resume continues the loss curve from the logged step") {
  TrainCfg c = cfg3d(1, 2);
  nn::ResNet3d ref(tiny3d(), 1);
  const auto full = train_branch(ref, tiny_data(), c);

  const auto dir = scratch("resume");
  c.run_dir = dir;
  c.stop_after_epochs = 2;
  nn::ResNet3d first(tiny3d(), 1);
  const auto part = train_branch(first, tiny_data(), c);
  CHECK(part.history.size() == 2);

  c.resume = true;
  c.stop_after_epochs = 0;
  nn::ResNet3d second(tiny3d(), 77);
  const auto rest = train_branch(second, tiny_data(), c);
  CHECK(rest.loss_history == full.loss_history);
  CHECK(parameter_checksum(second.parameters()) == parameter_checksum(ref.parameters()));

  long expect = 0;
  for (const auto& r : read_log(dir / "log.jsonl"))
    if (r["type"] == "step") CHECK(r["global_step"].get<long>() == expect++);
  CHECK(expect == static_cast<long>(full.loss_history.size()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite inputs abort training") {
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < tiny_data().size(); ++i) samples.push_back(tiny_data().at(i));
  for (auto& s : samples)
    if (s.record.split == Split::train) s.volume.data[100] = std::numeric_limits<float>::infinity();
  const Dataset bad(std::move(samples));
  TrainCfg c = cfg3d();
  c.augment = false;
  nn::ResNet3d m(tiny3d(), 1);
  CHECK_THROWS_AS(train_branch(m, bad, c), RuntimeFailure);
}

TEST_CASE("frozen backbone is bit-identical across 2.5D stage 1") {
  TrainCfg c = cfg25d();
  nn::MultiViewModel m(tiny25d(), 2);
  const auto st = train_branch(m, tiny_data(), c);
  REQUIRE(st.stages.size() == 3);
  CHECK(st.stages[0].backbone_checksum_before == st.stages[0].backbone_checksum_after);
  CHECK(st.stages[1].frozen_checksum_before == st.stages[1].frozen_checksum_after);
  CHECK(st.stages[1].backbone_checksum_before != st.stages[1].backbone_checksum_after);
  CHECK(st.stages[2].backbone_checksum_before != st.stages[2].backbone_checksum_after);
}

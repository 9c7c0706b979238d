// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "hybridct/core/error.hpp"
#include "hybridct/nn/checkpoint.hpp"
#include "hybridct/nn/optimizer.hpp"
#include "hybridct/nn/resnet3d.hpp"
#include "hybridct/nn/vit.hpp"

using namespace hybridct;
using namespace hybridct::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<float> d(lo, hi);
  for (float& v : t.values()) v = d(rng);
  return t;
}

// Scalar probe L = <wl, logits> + <wp, projection>, evaluated in double.
double probe(ClassifierBranch& m, const Tensor& x, const Tensor& wl, const Tensor& wp) {
  const auto out = m.forward(x, true);
  double s = 0.0;
  for (std::size_t i = 0; i < wl.size(); ++i) s += static_cast<double>(wl[i]) * out.logits[i];
  for (std::size_t i = 0; i < wp.size() && !out.projection.empty(); ++i)
    s += static_cast<double>(wp[i]) * out.projection[i];
  return s;
}

// Central differences on a handful of coordinates of every trainable parameter.
void check_param_grads(ClassifierBranch& m, const Tensor& x, double tol, int per_param = 2) {
  Rng rng(99);
  const auto out = m.forward(x, true);
  const Tensor wl = random_tensor(out.logits.shape(), rng);
  const Tensor wp = out.projection.empty() ? Tensor() : random_tensor(out.projection.shape(), rng);
  for (Parameter* p : m.parameters()) p->grad.zero();
  m.forward(x, true);
  m.backward(wl, wp.empty() ? nullptr : &wp);

  int checked = 0;
  for (Parameter* p : m.parameters()) {
    if (!p->trainable) continue;
    for (int k = 0; k < per_param; ++k) {
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p->value.size() - 1)(rng);
      const float orig = p->value[i];
      const float h = 3e-4f * std::max(1.0f, std::abs(orig));
      p->value[i] = orig + h;
      const double lp = probe(m, x, wl, wp);
      p->value[i] = orig - h;
      const double lm = probe(m, x, wl, wp);
      p->value[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = p->grad[i];
      INFO(p->name << "[" << i << "] fd=" << fd << " analytic=" << an);
      CHECK(std::abs(fd - an) <= tol * std::max(1.0, std::abs(fd)));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

Encoder25DCfg tiny_vit() {
  Encoder25DCfg c;
  c.slice_size = 16;
  c.patch_size = 8;
  c.k_slices = 2;
  c.depth = 2;
  c.embedding_dim = 8;
  c.n_heads = 2;
  c.mlp_ratio = 2;
  c.n_layer_groups = 2;
  c.projection_dim = 6;
  c.n_classes = 3;
  return c;
}

}  // namespace

TEST_CASE("resnet3d parameter gradients match finite differences") {
  Model3DCfg c;
  c.width_multiplier = 4.0 / 64;
  c.input_side = 8;
  c.n_classes = 3;
  c.projection_dim = 5;
  ResNet3d m(c, 1);
  Rng rng(3);
  const Tensor x = random_tensor({3, 1, 8, 8, 8}, rng, 0.0f, 1.0f);
  check_param_grads(m, x, 3e-2);
}

TEST_CASE("resnet3d shape contract and zero head") {
  Model3DCfg c;
  c.width_multiplier = 0.125;
  c.input_side = 32;
  c.n_classes = 4;
  ResNet3d m(c, 2);
  Rng rng(4);
  Tensor x = random_tensor({2, 1, 32, 32, 32}, rng, 0.0f, 1.0f);
  auto out = m.forward(x, false);
  CHECK(out.logits.shape() == std::vector<int>{2, 4});
  CHECK(out.embedding.shape() == std::vector<int>{2, c.embedding_dim()});
  m.head().weight.value.zero();
  m.head().bias.value.zero();
  out = m.forward(x, false);
  for (float v : out.logits.values()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(m.forward(Tensor({2, 2, 32, 32, 32}), false), ValidationError);
}

TEST_CASE("resnet3d eval batch independence and duplicate rows") {
  Model3DCfg c;
  c.width_multiplier = 0.125;
  c.input_side = 16;
  ResNet3d m(c, 5);
  Rng rng(6);
  Tensor x = random_tensor({3, 1, 16, 16, 16}, rng, 0.0f, 1.0f);
  std::copy_n(x.data(), 16 * 16 * 16, x.data() + 2 * 16 * 16 * 16);
  const auto batched = m.forward(x, false);
  for (int j = 0; j < 2; ++j) CHECK(batched.logits[j] == batched.logits[4 + j]);
  for (int i = 0; i < 3; ++i) {
    Tensor one({1, 1, 16, 16, 16});
    std::copy_n(x.data() + i * 4096, 4096, one.data());
    const auto single = m.forward(one, false);
    for (int j = 0; j < 2; ++j) CHECK(single.logits[j] == doctest::Approx(batched.logits[i * 2 + j]).epsilon(1e-5));
  }
}

TEST_CASE("resnet3d width 1.0 parameter count") {
  Model3DCfg c;
  c.n_classes = 2;
  ResNet3d m(c, 0);
  CHECK(count_parameters(m.backbone_parameters()) == 33147456);
}

TEST_CASE("resnet3d frozen stage keeps backbone exact under a step") {
  Model3DCfg c;
  c.width_multiplier = 0.125;
  c.input_side = 16;
  ResNet3d m(c, 7);
  apply_trainable_stage(m.backbone_parameters(), 1, 4);
  Rng rng(8);
  const Tensor x = random_tensor({2, 1, 16, 16, 16}, rng, 0.0f, 1.0f);
  std::vector<Tensor> before;
  for (Parameter* p : m.backbone_parameters()) before.push_back(p->value);
  AdamW opt(m.parameters(), {0.9, 0.999, 1e-8, 0.01});
  opt.zero_grad();
  m.forward(x, true);
  const Tensor d({2, 2}, 1.0f);
  const Tensor dp({2, c.projection_dim}, 1.0f);
  m.backward(d, &dp);
  opt.step(1e-2);
  std::size_t i = 0;
  for (Parameter* p : m.backbone_parameters()) CHECK(p->value.storage() == before[i++].storage());
}

TEST_CASE("vit multi-view parameter gradients match finite differences") {
  for (Pooling pooling : {Pooling::mean_token, Pooling::cls_token}) {
    auto c = tiny_vit();
    c.pooling = pooling;
    MultiViewModel m(c, 11);
    Rng rng(12);
    const Tensor x = random_tensor({2, 3, 2, 3, 16, 16}, rng);
    check_param_grads(m, x, 3e-2, 3);
  }
}

TEST_CASE("vit stage trainability and shapes") {
  auto c = tiny_vit();
  c.depth = 4;
  c.n_layer_groups = 4;
  MultiViewModel m(c, 13);
  m.set_trainable_stage(1);
  std::size_t trainable_backbone = 0;
  for (Parameter* p : m.parameters()) trainable_backbone += p->backbone && p->trainable;
  CHECK(trainable_backbone == 0);
  m.set_trainable_stage(2);
  for (Parameter* p : m.parameters())
    if (p->backbone) CHECK(p->trainable == (p->group >= 3));
  m.set_trainable_stage(3);
  for (Parameter* p : m.parameters()) CHECK(p->trainable);
  CHECK_THROWS_AS(m.set_trainable_stage(4), ValidationError);

  Rng rng(1);
  const auto emb = m.encoder().encode_slice(random_tensor({3, 16, 16}, rng));
  CHECK(emb.size() == 8);
  CHECK(m.encoder().encode_slice(random_tensor({3, 16, 16}, rng)) != emb);
}

TEST_CASE("vit gradients with a partly frozen encoder") {
  auto c = tiny_vit();
  c.depth = 4;
  c.n_layer_groups = 4;
  MultiViewModel m(c, 14);
  m.set_trainable_stage(2);
  Rng rng(15);
  check_param_grads(m, random_tensor({2, 3, 2, 3, 16, 16}, rng), 3e-2);
}

TEST_CASE("fusion concatenates per-view means") {
  Tensor e({2 * 3 * 2, 2});
  // sample 0: views get slices (1,2)/(3,4); sample 1 distinct values.
  for (int i = 0; i < 12; ++i) {
    e[2 * i] = static_cast<float>(i);
    e[2 * i + 1] = static_cast<float>(10 * i);
  }
  const Tensor f = concat_view_means(e, 2, 2);
  CHECK(f.shape() == std::vector<int>{2, 6});
  const float expect0[6] = {0.5f, 5.0f, 2.5f, 25.0f, 4.5f, 45.0f};
  for (int j = 0; j < 6; ++j) CHECK(f[j] == expect0[j]);
  CHECK(f[6] == 6.5f);
  CHECK_THROWS_AS(concat_view_means(Tensor({0, 2}), 0, 0), ValidationError);
}

TEST_CASE("checkpoint archive round-trips model and optimizer") {
  auto c = tiny_vit();
  MultiViewModel m(c, 21);
  AdamW opt(m.parameters(), {});
  for (Parameter* p : m.parameters()) p->grad.fill(0.5f);
  opt.step(1e-3);
  const auto path = std::filesystem::temp_directory_path() / "hybridct_test_ckpt.hckp";
  save_checkpoint(path, m, &opt, {{"stage", 2}});
  auto loaded = load_model(path);
  CHECK(loaded.archive.meta["stage"] == 2);
  auto a = m.parameters();
  auto b = loaded.model->parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value.storage() == b[i]->value.storage());
  AdamW opt2(loaded.model->parameters(), {});
  opt2.load_state(loaded.archive.tensors);
  CHECK(opt2.step_count("head.weight") == 1);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path), RuntimeFailure);
}

TEST_CASE("external pretrained encoder reports a missing weights file") {
  auto c = tiny_vit();
  c.backbone_kind = BackboneKind::external_pretrained;
  c.weights_path = "/nonexistent/encoder.hckp";
  try {
    MultiViewModel m(c, 1);
    FAIL("expected a load error");
  } catch (const RuntimeFailure& e) {
    CHECK(std::string(e.what()).find("/nonexistent/encoder.hckp") != std::string::npos);
  }
}

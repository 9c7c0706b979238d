// SPDX-License-Identifier: Apache-2.0
#include "hybridct/nn/resnet3d.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::nn {

void Model3DCfg::validate() const {
  HYBRIDCT_REQUIRE(n_classes >= 2, "n_classes must be >= 2");
  HYBRIDCT_REQUIRE(width_multiplier > 0 && std::isfinite(width_multiplier), "width_multiplier must be > 0");
  HYBRIDCT_REQUIRE(in_channels == 1, "the 3D branch takes single-channel volumes");
  HYBRIDCT_REQUIRE(input_side >= 8, "input_side must be >= 8");
  HYBRIDCT_REQUIRE(projection_dim >= 1, "projection_dim must be >= 1");
}

std::array<int, 4> Model3DCfg::stage_widths() const {
  std::array<int, 4> out{};
  const int base[4] = {64, 128, 256, 512};
  for (int i = 0; i < 4; ++i) out[i] = std::max(1, static_cast<int>(std::lround(base[i] * width_multiplier)));
  return out;
}

// ---------------------------------------------------------------------------- BasicBlock3d

BasicBlock3d::BasicBlock3d(const std::string& name, int in, int out, int stride, Rng& rng)
    : conv1_(name + ".conv1", {in, out, {3, 3, 3}, {stride, stride, stride}, {1, 1, 1}}, rng),
      conv2_(name + ".conv2", {out, out, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}}, rng),
      bn1_(name + ".bn1", out),
      bn2_(name + ".bn2", out) {
  if (stride != 1 || in != out) {
    has_down_ = true;
    down_conv_ = Conv3d(name + ".downsample.0", {in, out, {1, 1, 1}, {stride, stride, stride}, {0, 0, 0}}, rng);
    down_bn_ = BatchNorm(name + ".downsample.1", out);
  }
}

void BasicBlock3d::collect(ParamList& out) {
  conv1_.collect(out);
  bn1_.collect(out);
  conv2_.collect(out);
  bn2_.collect(out);
  if (has_down_) {
    down_conv_.collect(out);
    down_bn_.collect(out);
  }
}

void BasicBlock3d::collect_buffers(BufferList& out) {
  bn1_.collect_buffers(out);
  bn2_.collect_buffers(out);
  if (has_down_) down_bn_.collect_buffers(out);
}

void BasicBlock3d::set_group(int group) {
  ParamList ps;
  collect(ps);
  for (Parameter* p : ps) {
    p->group = group;
    p->backbone = true;
  }
}

Tensor BasicBlock3d::forward(const Tensor& x, bool training) {
  Tensor h = relu1_.forward(bn1_.forward(conv1_.forward(x, training), training), training);
  h = bn2_.forward(conv2_.forward(h, training), training);
  if (has_down_)
    add_inplace(h, down_bn_.forward(down_conv_.forward(x, training), training));
  else
    add_inplace(h, x);
  return relu2_.forward(h, training);
}

Tensor BasicBlock3d::backward(const Tensor& dy, bool need_dx) {
  const Tensor d = relu2_.backward(dy);
  Tensor dx = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(d, true), true)), true),
                              need_dx);
  if (has_down_) {
    Tensor ds = down_conv_.backward(down_bn_.backward(d, true), need_dx);
    if (need_dx) add_inplace(dx, ds);
  } else if (need_dx) {
    add_inplace(dx, d);
  }
  return dx;
}

// -------------------------------------------------------------------------------- ResNet3d

ResNet3d::ResNet3d(const Model3DCfg& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const auto w = cfg_.stage_widths();
  stem_conv_ = Conv3d("stem.0", {cfg_.in_channels, w[0], {3, 7, 7}, {1, 2, 2}, {1, 3, 3}}, rng);
  stem_bn_ = BatchNorm("stem.1", w[0]);
  int in = w[0];
  for (int stage = 0; stage < 4; ++stage) {
    for (int b = 0; b < 2; ++b) {
      const int stride = (stage > 0 && b == 0) ? 2 : 1;
      blocks_.emplace_back(fmt::format("layer{}.{}", stage + 1, b), in, w[stage], stride, rng);
      blocks_.back().set_group(stage + 1);
      in = w[stage];
    }
  }
  for (Parameter* p : {&stem_conv_.weight, &stem_bn_.gamma, &stem_bn_.beta}) {
    p->group = 1;
    p->backbone = true;
  }
  const int e = cfg_.embedding_dim();
  head_ = Linear("fc", e, cfg_.n_classes, rng);
  proj1_ = Linear("proj.0", e, e, rng);
  proj2_ = Linear("proj.2", e, cfg_.projection_dim, rng);
}

std::vector<int> ResNet3d::sample_shape() const {
  return {cfg_.in_channels, cfg_.input_side, cfg_.input_side, cfg_.input_side};
}

ParamList ResNet3d::backbone_parameters() {
  ParamList out;
  stem_conv_.collect(out);
  stem_bn_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  return out;
}

ParamList ResNet3d::parameters() {
  ParamList out = backbone_parameters();
  head_.collect(out);
  proj1_.collect(out);
  proj2_.collect(out);
  return out;
}

BufferList ResNet3d::buffers() {
  BufferList out;
  stem_bn_.collect_buffers(out);
  for (auto& b : blocks_) b.collect_buffers(out);
  return out;
}

BranchOutput ResNet3d::forward(const Tensor& batch, bool training) {
  if (batch.rank() != 5 || batch.dim(1) != cfg_.in_channels)
    throw ValidationError(fmt::format("3D branch expects [N, {}, D, H, W], got {}", cfg_.in_channels,
                                      batch.shape_string()));
  Tensor h = stem_relu_.forward(stem_bn_.forward(stem_conv_.forward(batch, training), training), training);
  for (auto& b : blocks_) h = b.forward(h, training);

  const int N = h.dim(0);
  const int C = h.dim(1);
  const std::size_t S = h.row_size() / C;
  pooled_shape_ = h.shape();
  BranchOutput out;
  out.embedding = Tensor({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const float* p = h.data() + (static_cast<std::size_t>(n) * C + c) * S;
      double s = 0.0;
      for (std::size_t i = 0; i < S; ++i) s += p[i];
      out.embedding[static_cast<std::size_t>(n) * C + c] = static_cast<float>(s / S);
    }
  out.logits = head_.forward(out.embedding, training);
  out.projection = proj2_.forward(proj_relu_.forward(proj1_.forward(out.embedding, training), training), training);
  return out;
}

void ResNet3d::backward(const Tensor& d_logits, const Tensor* d_projection) {
  Tensor d_emb = head_.backward(d_logits, true);
  if (d_projection)
    add_inplace(d_emb, proj1_.backward(proj_relu_.backward(proj2_.backward(*d_projection, true)), true));

  int lowest = 5;
  for (Parameter* p : backbone_parameters())
    if (p->trainable) lowest = std::min(lowest, p->group);
  if (lowest > 4) return;

  const int N = pooled_shape_[0];
  const int C = pooled_shape_[1];
  Tensor dh(pooled_shape_);
  const std::size_t S = dh.row_size() / C;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const float g = d_emb[static_cast<std::size_t>(n) * C + c] / static_cast<float>(S);
      std::fill_n(dh.data() + (static_cast<std::size_t>(n) * C + c) * S, S, g);
    }
  for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
    // Groups grow with depth, so dx is only needed while something below is trainable.
    const bool below_trainable = i > 0 ? ((i - 1) / 2 + 1 >= lowest) : lowest <= 1;
    dh = blocks_[i].backward(dh, below_trainable);
    if (!below_trainable) return;
  }
  dh = stem_bn_.backward(stem_relu_.backward(dh), true);
  stem_conv_.backward(dh, false);
}

nlohmann::json ResNet3d::arch() const {
  return {{"kind", "3d"},
          {"n_classes", cfg_.n_classes},
          {"width_multiplier", cfg_.width_multiplier},
          {"in_channels", cfg_.in_channels},
          {"input_side", cfg_.input_side},
          {"projection_dim", cfg_.projection_dim}};
}

}  // namespace hybridct::nn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "hybridct/nn/branch.hpp"
#include "hybridct/nn/layers.hpp"

namespace hybridct::nn {

struct Model3DCfg {
  int n_classes = 2;
  double width_multiplier = 1.0;
  int in_channels = 1;
  int input_side = 128;
  /// Width of the contrastive projection head output.
  int projection_dim = 128;

  void validate() const;
  /// Channel widths of the four residual stages.
  std::array<int, 4> stage_widths() const;
  int embedding_dim() const { return stage_widths()[3]; }
};

/// Two 3x3x3 convolutions with batch norm and an identity or 1x1x1-projection shortcut.
class BasicBlock3d {
 public:
  BasicBlock3d(const std::string& name, int in, int out, int stride, Rng& rng);

  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& dy, bool need_dx);
  void collect(ParamList& out);
  void collect_buffers(BufferList& out);
  void set_group(int group);

 private:
  Conv3d conv1_, conv2_;
  BatchNorm bn1_, bn2_;
  ReLU relu1_, relu2_;
  bool has_down_ = false;
  Conv3d down_conv_;
  BatchNorm down_bn_;
};

/// 18-layer video-style residual network (stem 3x7x7 stride (1,2,2), 4 stages x 2 blocks),
/// single-channel input, global average pool, linear head and a 2-layer contrastive projection.
class ResNet3d final : public ClassifierBranch {
 public:
  ResNet3d(const Model3DCfg& cfg, std::uint64_t seed);

  std::string kind() const override { return "3d"; }
  int n_classes() const override { return cfg_.n_classes; }
  std::vector<int> sample_shape() const override;
  BranchOutput forward(const Tensor& batch, bool training) override;
  void backward(const Tensor& d_logits, const Tensor* d_projection) override;
  ParamList parameters() override;
  BufferList buffers() override;
  int n_layer_groups() const override { return 4; }
  bool has_projection() const override { return true; }
  nlohmann::json arch() const override;

  const Model3DCfg& cfg() const { return cfg_; }
  Linear& head() { return head_; }
  /// Parameters excluding the classification and projection heads.
  ParamList backbone_parameters();

 private:
  Model3DCfg cfg_;
  Conv3d stem_conv_;
  BatchNorm stem_bn_;
  ReLU stem_relu_;
  std::vector<BasicBlock3d> blocks_;
  Linear head_;
  Linear proj1_;
  ReLU proj_relu_;
  Linear proj2_;
  std::vector<int> pooled_shape_;  // [N, C, D, H, W] before pooling
};

}  // namespace hybridct::nn

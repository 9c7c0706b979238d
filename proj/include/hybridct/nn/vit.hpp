// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hybridct/nn/branch.hpp"
#include "hybridct/nn/layers.hpp"

namespace hybridct::nn {

enum class BackboneKind { builtin_small_transformer, external_pretrained };
enum class Pooling { cls_token, mean_token };

std::string to_string(BackboneKind k);
BackboneKind parse_backbone_kind(const std::string& s);
std::string to_string(Pooling p);
Pooling parse_pooling(const std::string& s);

struct Encoder25DCfg {
  BackboneKind backbone_kind = BackboneKind::builtin_small_transformer;
  int slice_size = 224;
  int k_slices = 10;
  int patch_size = 16;
  int depth = 4;
  int embedding_dim = 64;
  int n_heads = 4;
  int mlp_ratio = 4;
  int n_layer_groups = 4;
  /// Width of the fused multi-view feature.
  int projection_dim = 128;
  int n_classes = 2;
  Pooling pooling = Pooling::mean_token;
  /// Archive produced by the weight conversion tool; required for external_pretrained.
  std::filesystem::path weights_path;

  void validate() const;
  int n_patches() const { return (slice_size / patch_size) * (slice_size / patch_size); }
};

/// Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x)).
class TransformerBlock {
 public:
  TransformerBlock(const std::string& name, int dim, int heads, int mlp_ratio, Rng& rng);

  Tensor forward(const Tensor& x, int seq_len, bool keep);
  Tensor backward(const Tensor& dy, bool need_dx);
  void collect(ParamList& out);
  void set_group(int group);

 private:
  LayerNorm ln1_, ln2_;
  SelfAttention attn_;
  Linear fc1_, fc2_;
  GELU act_;
};

/// Patch-embedding vision transformer over [N, 3, S, S] slices producing one pooled
/// embedding per slice.
class VitEncoder {
 public:
  explicit VitEncoder(const Encoder25DCfg& cfg, Rng& rng);

  Tensor forward(const Tensor& slices, bool keep);
  /// Stops at the lowest trainable layer group; no-op when the encoder is fully frozen.
  void backward(const Tensor& d_embedding);
  /// Eval-mode embedding of one prepared [3, S, S] slice.
  std::vector<float> encode_slice(const Tensor& prepared);

  void collect(ParamList& out);
  int embedding_dim() const { return cfg_.embedding_dim; }
  int seq_len() const { return cfg_.n_patches() + 1; }
  int group_of_block(int b) const;

 private:
  Tensor patchify(const Tensor& slices) const;
  int lowest_trainable_group();

  Encoder25DCfg cfg_;
  Linear patch_embed_;
  Parameter cls_token_;  // [E]
  Parameter pos_embed_;  // [T, E]
  std::vector<TransformerBlock> blocks_;
  LayerNorm norm_;
  int n_slices_ = 0;
};

/// Mean over the K slice embeddings of each view, concatenated: [N*3*K, E] -> [N, 3E].
Tensor concat_view_means(const Tensor& slice_embeddings, int n, int k);

/// 2.5D branch: shared slice encoder, per-view mean pooling, concatenation, batch
/// normalization, a learned projection with ReLU, and a linear classification head.
class MultiViewModel final : public ClassifierBranch {
 public:
  /// With `load_external` false an external_pretrained config is built with random weights
  /// (the caller restores them from a checkpoint).
  MultiViewModel(const Encoder25DCfg& cfg, std::uint64_t seed, bool load_external = true);

  std::string kind() const override { return "25d"; }
  int n_classes() const override { return cfg_.n_classes; }
  std::vector<int> sample_shape() const override;
  BranchOutput forward(const Tensor& batch, bool training) override;
  void backward(const Tensor& d_logits, const Tensor* d_projection) override;
  ParamList parameters() override;
  BufferList buffers() override;
  int n_layer_groups() const override { return cfg_.n_layer_groups; }
  bool has_projection() const override { return false; }
  nlohmann::json arch() const override;

  const Encoder25DCfg& cfg() const { return cfg_; }
  VitEncoder& encoder() { return encoder_; }
  Linear& fusion() { return fuse_; }
  Linear& head() { return head_; }

  /// fused = relu(proj(norm(concat_view_means(...)))).
  Tensor fuse_views(const Tensor& slice_embeddings, int n, bool keep);
  Tensor classify(const Tensor& fused, bool keep);

 private:
  Encoder25DCfg cfg_;
  VitEncoder encoder_;
  BatchNorm fuse_norm_;
  Linear fuse_;
  ReLU fuse_act_;
  Linear head_;
  int batch_ = 0;
};

/// Loads `encoder.*` tensors from an archive into `params`; throws RuntimeFailure naming the
/// path when it is missing or incompatible.
void load_encoder_weights(const std::filesystem::path& path, const ParamList& params);

}  // namespace hybridct::nn

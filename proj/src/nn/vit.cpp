// SPDX-License-Identifier: Apache-2.0
#include "hybridct/nn/vit.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"
#include "hybridct/nn/checkpoint.hpp"

namespace hybridct::nn {

std::string to_string(BackboneKind k) {
  return k == BackboneKind::builtin_small_transformer ? "builtin_small_transformer" : "external_pretrained";
}

BackboneKind parse_backbone_kind(const std::string& s) {
  if (s == "builtin_small_transformer" || s == "builtin") return BackboneKind::builtin_small_transformer;
  if (s == "external_pretrained" || s == "external") return BackboneKind::external_pretrained;
  throw ValidationError("unknown backbone kind '" + s + "'");
}

std::string to_string(Pooling p) { return p == Pooling::cls_token ? "cls" : "mean"; }

Pooling parse_pooling(const std::string& s) {
  if (s == "cls") return Pooling::cls_token;
  if (s == "mean") return Pooling::mean_token;
  throw ValidationError("unknown pooling '" + s + "' (expected cls or mean)");
}

void Encoder25DCfg::validate() const {
  HYBRIDCT_REQUIRE(patch_size >= 1 && slice_size % patch_size == 0,
                   fmt::format("slice_size {} is not divisible by patch_size {}", slice_size, patch_size));
  HYBRIDCT_REQUIRE(depth >= 1, "encoder depth must be >= 1");
  HYBRIDCT_REQUIRE(n_layer_groups >= 2, "n_layer_groups must be >= 2");
  HYBRIDCT_REQUIRE(embedding_dim >= 1 && n_heads >= 1 && embedding_dim % n_heads == 0,
                   "embedding_dim must be a positive multiple of n_heads");
  HYBRIDCT_REQUIRE(mlp_ratio >= 1, "mlp_ratio must be >= 1");
  HYBRIDCT_REQUIRE(projection_dim >= 1, "projection_dim must be >= 1");
  HYBRIDCT_REQUIRE(n_classes >= 2, "n_classes must be >= 2");
  HYBRIDCT_REQUIRE(k_slices >= 1, "k_slices must be >= 1");
}

// ------------------------------------------------------------------------ TransformerBlock

TransformerBlock::TransformerBlock(const std::string& name, int dim, int heads, int mlp_ratio, Rng& rng)
    : ln1_(name + ".norm1", dim),
      ln2_(name + ".norm2", dim),
      attn_(name + ".attn", dim, heads, rng),
      fc1_(name + ".mlp.fc1", dim, dim * mlp_ratio, rng, Init::trunc_normal),
      fc2_(name + ".mlp.fc2", dim * mlp_ratio, dim, rng, Init::trunc_normal) {}

void TransformerBlock::collect(ParamList& out) {
  ln1_.collect(out);
  attn_.collect(out);
  ln2_.collect(out);
  fc1_.collect(out);
  fc2_.collect(out);
}

void TransformerBlock::set_group(int group) {
  ln1_.set_group(group, true);
  ln2_.set_group(group, true);
  attn_.set_group(group, true);
  fc1_.set_group(group, true);
  fc2_.set_group(group, true);
}

Tensor TransformerBlock::forward(const Tensor& x, int seq_len, bool keep) {
  Tensor h = add(x, attn_.forward(ln1_.forward(x, keep), seq_len, keep));
  add_inplace(h, fc2_.forward(act_.forward(fc1_.forward(ln2_.forward(h, keep), keep), keep), keep));
  return h;
}

Tensor TransformerBlock::backward(const Tensor& dy, bool need_dx) {
  // The residual stream always needs gradients inside the block; only the final dx is optional.
  Tensor dh = add(dy, ln2_.backward(fc1_.backward(act_.backward(fc2_.backward(dy, true)), true), true));
  Tensor da = ln1_.backward(attn_.backward(dh, true), need_dx);
  if (!need_dx) return {};
  add_inplace(da, dh);
  return da;
}

// ------------------------------------------------------------------------------ VitEncoder

VitEncoder::VitEncoder(const Encoder25DCfg& cfg, Rng& rng)
    : cfg_(cfg),
      patch_embed_("encoder.patch_embed", 3 * cfg.patch_size * cfg.patch_size, cfg.embedding_dim, rng,
                   Init::trunc_normal),
      cls_token_("encoder.cls_token", {cfg.embedding_dim}),
      pos_embed_("encoder.pos_embed", {cfg.n_patches() + 1, cfg.embedding_dim}),
      norm_("encoder.norm", cfg.embedding_dim) {
  cfg_.validate();
  std::normal_distribution<float> dist(0.0f, 0.02f);
  for (float& v : cls_token_.value.values()) v = std::clamp(dist(rng), -0.04f, 0.04f);
  for (float& v : pos_embed_.value.values()) v = std::clamp(dist(rng), -0.04f, 0.04f);
  patch_embed_.set_group(1, true);
  for (Parameter* p : {&cls_token_, &pos_embed_}) {
    p->group = 1;
    p->backbone = true;
  }
  for (int b = 0; b < cfg_.depth; ++b) {
    blocks_.emplace_back(fmt::format("encoder.blocks.{}", b), cfg_.embedding_dim, cfg_.n_heads, cfg_.mlp_ratio,
                         rng);
    blocks_.back().set_group(group_of_block(b));
  }
  norm_.set_group(cfg_.n_layer_groups, true);
}

int VitEncoder::group_of_block(int b) const { return 1 + b * cfg_.n_layer_groups / cfg_.depth; }

void VitEncoder::collect(ParamList& out) {
  patch_embed_.collect(out);
  out.push_back(&cls_token_);
  out.push_back(&pos_embed_);
  for (auto& b : blocks_) b.collect(out);
  norm_.collect(out);
}

Tensor VitEncoder::patchify(const Tensor& slices) const {
  const int N = slices.dim(0);
  const int S = cfg_.slice_size;
  const int p = cfg_.patch_size;
  const int g = S / p;
  const int dim = 3 * p * p;
  Tensor out({N * g * g, dim});
  for (int n = 0; n < N; ++n)
    for (int py = 0; py < g; ++py)
      for (int px = 0; px < g; ++px) {
        float* dst = out.data() + (static_cast<std::size_t>(n) * g * g + py * g + px) * dim;
        for (int c = 0; c < 3; ++c)
          for (int iy = 0; iy < p; ++iy) {
            const float* src = slices.data() + ((static_cast<std::size_t>(n) * 3 + c) * S + py * p + iy) * S + px * p;
            std::copy_n(src, p, dst + (c * p + iy) * p);
          }
      }
  return out;
}

Tensor VitEncoder::forward(const Tensor& slices, bool keep) {
  const int S = cfg_.slice_size;
  if (slices.rank() != 4 || slices.dim(1) != 3 || slices.dim(2) != S || slices.dim(3) != S)
    throw ValidationError(fmt::format("slice encoder expects [N, 3, {}, {}], got {}", S, S, slices.shape_string()));
  const int N = slices.dim(0);
  const int P = cfg_.n_patches();
  const int T = P + 1;
  const int E = cfg_.embedding_dim;
  const Tensor patches = patch_embed_.forward(patchify(slices), keep);
  Tensor x({N * T, E});
  for (int n = 0; n < N; ++n) {
    float* row0 = x.data() + static_cast<std::size_t>(n) * T * E;
    for (int e = 0; e < E; ++e) row0[e] = cls_token_.value[e] + pos_embed_.value[e];
    for (int t = 1; t < T; ++t) {
      const float* src = patches.data() + (static_cast<std::size_t>(n) * P + t - 1) * E;
      const float* pos = pos_embed_.value.data() + static_cast<std::size_t>(t) * E;
      float* dst = row0 + static_cast<std::size_t>(t) * E;
      for (int e = 0; e < E; ++e) dst[e] = src[e] + pos[e];
    }
  }
  for (auto& b : blocks_) x = b.forward(x, T, keep);
  x = norm_.forward(x, keep);

  Tensor out({N, E});
  for (int n = 0; n < N; ++n) {
    float* dst = out.data() + static_cast<std::size_t>(n) * E;
    const float* base = x.data() + static_cast<std::size_t>(n) * T * E;
    if (cfg_.pooling == Pooling::cls_token) {
      std::copy_n(base, E, dst);
    } else {
      for (int t = 1; t < T; ++t)
        for (int e = 0; e < E; ++e) dst[e] += base[static_cast<std::size_t>(t) * E + e];
      for (int e = 0; e < E; ++e) dst[e] /= static_cast<float>(P);
    }
  }
  if (keep) n_slices_ = N;
  return out;
}

int VitEncoder::lowest_trainable_group() {
  ParamList ps;
  collect(ps);
  int lowest = cfg_.n_layer_groups + 1;
  for (Parameter* p : ps)
    if (p->trainable) lowest = std::min(lowest, p->group);
  return lowest;
}

void VitEncoder::backward(const Tensor& d_embedding) {
  const int lowest = lowest_trainable_group();
  if (lowest > cfg_.n_layer_groups) return;
  const int N = n_slices_;
  const int P = cfg_.n_patches();
  const int T = P + 1;
  const int E = cfg_.embedding_dim;
  Tensor dx({N * T, E});
  for (int n = 0; n < N; ++n) {
    const float* g = d_embedding.data() + static_cast<std::size_t>(n) * E;
    float* base = dx.data() + static_cast<std::size_t>(n) * T * E;
    if (cfg_.pooling == Pooling::cls_token) {
      std::copy_n(g, E, base);
    } else {
      for (int t = 1; t < T; ++t)
        for (int e = 0; e < E; ++e) base[static_cast<std::size_t>(t) * E + e] = g[e] / static_cast<float>(P);
    }
  }
  dx = norm_.backward(dx, true);
  for (int b = cfg_.depth - 1; b >= 0; --b) {
    const bool below = b > 0 ? group_of_block(b - 1) >= lowest : lowest <= 1;
    dx = blocks_[b].backward(dx, below);
    if (!below) return;
  }
  // Embedding layer (group 1).
  if (cls_token_.trainable) {
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t) {
        const float* g = dx.data() + (static_cast<std::size_t>(n) * T + t) * E;
        for (int e = 0; e < E; ++e) pos_embed_.grad[static_cast<std::size_t>(t) * E + e] += g[e];
        if (t == 0)
          for (int e = 0; e < E; ++e) cls_token_.grad[e] += g[e];
      }
  }
  Tensor dpatch({N * P, E});
  for (int n = 0; n < N; ++n)
    std::copy_n(dx.data() + (static_cast<std::size_t>(n) * T + 1) * E, static_cast<std::size_t>(P) * E,
                dpatch.data() + static_cast<std::size_t>(n) * P * E);
  patch_embed_.backward(dpatch, false);
}

std::vector<float> VitEncoder::encode_slice(const Tensor& prepared) {
  Tensor batch = prepared;
  batch.reshape({1, prepared.dim(0), prepared.dim(1), prepared.dim(2)});
  const Tensor out = forward(batch, false);
  return {out.values().begin(), out.values().end()};
}

// -------------------------------------------------------------------------- MultiViewModel

Tensor concat_view_means(const Tensor& slice_embeddings, int n, int k) {
  HYBRIDCT_REQUIRE(k >= 1, "a view needs at least one slice");
  HYBRIDCT_REQUIRE(slice_embeddings.rank() == 2 && slice_embeddings.dim(0) == n * 3 * k,
                   "expected [N*3*K, E] slice embeddings");
  const int E = slice_embeddings.dim(1);
  Tensor out({n, 3 * E});
  for (int i = 0; i < n; ++i)
    for (int v = 0; v < 3; ++v) {
      float* dst = out.data() + static_cast<std::size_t>(i) * 3 * E + v * E;
      for (int s = 0; s < k; ++s) {
        const float* src = slice_embeddings.data() + ((static_cast<std::size_t>(i) * 3 + v) * k + s) * E;
        for (int e = 0; e < E; ++e) dst[e] += src[e];
      }
      for (int e = 0; e < E; ++e) dst[e] /= static_cast<float>(k);
    }
  return out;
}

namespace {

Archive read_weights(const std::filesystem::path& path) {
  if (path.empty()) throw ValidationError("external_pretrained backbone needs a weights_path");
  if (!std::filesystem::exists(path)) throw RuntimeFailure("pretrained weights not found: " + path.string());
  try {
    return read_archive(path);
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure("cannot load pretrained weights " + path.string() + ": " + e.what());
  }
}

Encoder25DCfg resolve_external(Encoder25DCfg cfg, bool load_external) {
  if (cfg.backbone_kind != BackboneKind::external_pretrained || !load_external) return cfg;
  const Archive a = read_weights(cfg.weights_path);
  try {
    cfg.patch_size = a.arch.value("patch_size", cfg.patch_size);
    cfg.depth = a.arch.value("depth", cfg.depth);
    cfg.embedding_dim = a.arch.value("embedding_dim", cfg.embedding_dim);
    cfg.n_heads = a.arch.value("n_heads", cfg.n_heads);
    cfg.mlp_ratio = a.arch.value("mlp_ratio", cfg.mlp_ratio);
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeFailure("bad architecture in " + cfg.weights_path.string() + ": " + e.what());
  }
  return cfg;
}

// Bilinear resampling of the patch-grid part of a [1 + g*g, E] position table.
Tensor resize_pos_embed(const Tensor& src, int new_grid) {
  const int E = src.dim(1);
  const int old_grid = static_cast<int>(std::lround(std::sqrt(src.dim(0) - 1)));
  if (old_grid * old_grid != src.dim(0) - 1) throw RuntimeFailure("pretrained pos_embed is not a square grid");
  Tensor out({1 + new_grid * new_grid, E});
  std::copy_n(src.data(), E, out.data());
  const double scale = static_cast<double>(old_grid) / new_grid;
  auto coord = [&](int i, int& i0, int& i1, double& w) {
    const double c = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(old_grid - 1));
    i0 = static_cast<int>(std::floor(c));
    i1 = std::min(i0 + 1, old_grid - 1);
    w = c - i0;
  };
  for (int y = 0; y < new_grid; ++y)
    for (int x = 0; x < new_grid; ++x) {
      int y0, y1, x0, x1;
      double wy, wx;
      coord(y, y0, y1, wy);
      coord(x, x0, x1, wx);
      auto at = [&](int yy, int xx, int e) { return src[static_cast<std::size_t>(1 + yy * old_grid + xx) * E + e]; };
      float* dst = out.data() + static_cast<std::size_t>(1 + y * new_grid + x) * E;
      for (int e = 0; e < E; ++e)
        dst[e] = static_cast<float>((1 - wy) * ((1 - wx) * at(y0, x0, e) + wx * at(y0, x1, e)) +
                                    wy * ((1 - wx) * at(y1, x0, e) + wx * at(y1, x1, e)));
    }
  return out;
}

}  // namespace

void load_encoder_weights(const std::filesystem::path& path, const ParamList& params) {
  const Archive a = read_weights(path);
  for (Parameter* p : params) {
    if (p->name.rfind("encoder.", 0) != 0) continue;
    const auto it = a.tensors.find(p->name);
    if (it == a.tensors.end())
      throw RuntimeFailure("pretrained weights " + path.string() + " are missing '" + p->name + "'");
    Tensor t = it->second;
    if (p->name == "encoder.pos_embed" && t.rank() == 2 && t.shape() != p->value.shape() &&
        t.dim(1) == p->value.dim(1)) {
      const int grid = static_cast<int>(std::lround(std::sqrt(p->value.dim(0) - 1)));
      t = resize_pos_embed(t, grid);
    }
    if (t.shape() != p->value.shape())
      throw RuntimeFailure(fmt::format("pretrained weights {}: '{}' is {}, expected {}", path.string(), p->name,
                                       t.shape_string(), p->value.shape_string()));
    p->value = std::move(t);
  }
}

MultiViewModel::MultiViewModel(const Encoder25DCfg& cfg, std::uint64_t seed, bool load_external)
    : cfg_(resolve_external(cfg, load_external)), encoder_([&]() -> VitEncoder {
        Rng rng(seed);
        return VitEncoder(cfg_, rng);
      }()) {
  Rng rng(derive_seed(seed, {1}));
  fuse_norm_ = BatchNorm("fusion.norm", 3 * cfg_.embedding_dim);
  fuse_ = Linear("fusion.proj", 3 * cfg_.embedding_dim, cfg_.projection_dim, rng);
  head_ = Linear("head", cfg_.projection_dim, cfg_.n_classes, rng);
  if (cfg_.backbone_kind == BackboneKind::external_pretrained && load_external) {
    ParamList ps;
    encoder_.collect(ps);
    load_encoder_weights(cfg_.weights_path, ps);
  }
}

std::vector<int> MultiViewModel::sample_shape() const {
  return {3, cfg_.k_slices, 3, cfg_.slice_size, cfg_.slice_size};
}

ParamList MultiViewModel::parameters() {
  ParamList out;
  encoder_.collect(out);
  fuse_norm_.collect(out);
  fuse_.collect(out);
  head_.collect(out);
  return out;
}

BufferList MultiViewModel::buffers() {
  BufferList out;
  fuse_norm_.collect_buffers(out);
  return out;
}

Tensor MultiViewModel::fuse_views(const Tensor& slice_embeddings, int n, bool keep) {
  const int k = slice_embeddings.dim(0) / (3 * std::max(n, 1));
  const Tensor pooled = fuse_norm_.forward(concat_view_means(slice_embeddings, n, k), keep);
  return fuse_act_.forward(fuse_.forward(pooled, keep), keep);
}

Tensor MultiViewModel::classify(const Tensor& fused, bool keep) {
  if (fused.rank() != 2 || fused.dim(1) != cfg_.projection_dim)
    throw ValidationError(fmt::format("classification head expects [N, {}], got {}", cfg_.projection_dim,
                                      fused.shape_string()));
  return head_.forward(fused, keep);
}

BranchOutput MultiViewModel::forward(const Tensor& batch, bool training) {
  const auto expect = sample_shape();
  if (batch.rank() != 6 || !std::equal(expect.begin(), expect.end(), batch.shape().begin() + 1))
    throw ValidationError(fmt::format("2.5D branch expects [N, 3, {}, 3, {}, {}], got {}", cfg_.k_slices,
                                      cfg_.slice_size, cfg_.slice_size, batch.shape_string()));
  const int N = batch.dim(0);
  Tensor slices = batch;
  slices.reshape({N * 3 * cfg_.k_slices, 3, cfg_.slice_size, cfg_.slice_size});
  const Tensor emb = encoder_.forward(slices, training);
  BranchOutput out;
  out.embedding = fuse_views(emb, N, training);
  out.logits = classify(out.embedding, training);
  if (training) batch_ = N;
  return out;
}

void MultiViewModel::backward(const Tensor& d_logits, const Tensor* /*d_projection*/) {
  const Tensor d_fused = head_.backward(d_logits, true);
  const Tensor d_concat = fuse_norm_.backward(fuse_.backward(fuse_act_.backward(d_fused), true), true);
  ParamList enc;
  encoder_.collect(enc);
  if (std::none_of(enc.begin(), enc.end(), [](const Parameter* p) { return p->trainable; })) return;
  const int N = batch_;
  const int K = cfg_.k_slices;
  const int E = cfg_.embedding_dim;
  Tensor d_emb({N * 3 * K, E});
  for (int i = 0; i < N; ++i)
    for (int v = 0; v < 3; ++v) {
      const float* g = d_concat.data() + static_cast<std::size_t>(i) * 3 * E + v * E;
      for (int s = 0; s < K; ++s) {
        float* dst = d_emb.data() + ((static_cast<std::size_t>(i) * 3 + v) * K + s) * E;
        for (int e = 0; e < E; ++e) dst[e] = g[e] / static_cast<float>(K);
      }
    }
  encoder_.backward(d_emb);
}

nlohmann::json MultiViewModel::arch() const {
  return {{"kind", "25d"},
          {"backbone_kind", to_string(cfg_.backbone_kind)},
          {"slice_size", cfg_.slice_size},
          {"k_slices", cfg_.k_slices},
          {"patch_size", cfg_.patch_size},
          {"depth", cfg_.depth},
          {"embedding_dim", cfg_.embedding_dim},
          {"n_heads", cfg_.n_heads},
          {"mlp_ratio", cfg_.mlp_ratio},
          {"n_layer_groups", cfg_.n_layer_groups},
          {"projection_dim", cfg_.projection_dim},
          {"n_classes", cfg_.n_classes},
          {"pooling", to_string(cfg_.pooling)},
          {"weights_path", cfg_.weights_path.string()}};
}

}  // namespace hybridct::nn

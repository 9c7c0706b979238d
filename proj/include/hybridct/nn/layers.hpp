// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>

#include "hybridct/core/rng.hpp"
#include "hybridct/nn/parameter.hpp"

namespace hybridct::nn {

enum class Init {
  torch_default,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias
  trunc_normal,   // N(0, 0.02) truncated at 2 std, zero bias
  zeros,
};

/// y = x W^T + b over the last dimension; leading dimensions are flattened.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng, Init init = Init::torch_default);

  Tensor forward(const Tensor& x, bool keep);
  /// Accumulates weight gradients when trainable; returns dL/dx when need_dx.
  Tensor backward(const Tensor& dy, bool need_dx);
  void collect(ParamList& out) { out.push_back(&weight); out.push_back(&bias); }
  void set_group(int group, bool backbone);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Parameter weight;  // [out, in]
  Parameter bias;    // [out]

 private:
  int in_ = 0;
  int out_ = 0;
  Tensor x_;
};

struct Conv3dSpec {
  int in_channels = 1;
  int out_channels = 1;
  std::array<int, 3> kernel{3, 3, 3};
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> padding{1, 1, 1};
};

/// 3D convolution without bias over [N, C, D, H, W], im2col + GEMM.
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(const std::string& name, const Conv3dSpec& spec, Rng& rng);

  Tensor forward(const Tensor& x, bool keep);
  Tensor backward(const Tensor& dy, bool need_dx);
  void collect(ParamList& out) { out.push_back(&weight); }
  const Conv3dSpec& spec() const { return spec_; }

  Parameter weight;  // [out, in, kd, kh, kw]

 private:
  std::array<int, 3> out_dims(const Tensor& x) const;

  Conv3dSpec spec_;
  Tensor x_;
};

/// Per-channel normalization over batch and spatial axes of [N, C, ...].
/// Batch statistics are used only while training a trainable layer.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, int channels);

  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& dy, bool need_dx);
  void collect(ParamList& out) { out.push_back(&gamma); out.push_back(&beta); }
  void collect_buffers(BufferList& out);

  Parameter gamma;
  Parameter beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

 private:
  std::string name_;
  Tensor xhat_;
  std::vector<double> inv_std_;
  bool used_batch_stats_ = false;
};

/// Normalization over the last dimension.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);

  Tensor forward(const Tensor& x, bool keep);
  Tensor backward(const Tensor& dy, bool need_dx);
  void collect(ParamList& out) { out.push_back(&gamma); out.push_back(&beta); }
  void set_group(int group, bool backbone);

  Parameter gamma;
  Parameter beta;
  double eps = 1e-6;

 private:
  int dim_ = 0;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x, bool keep);
  Tensor backward(const Tensor& dy) const;

 private:
  Tensor y_;
};

/// Exact (erf) GELU.
class GELU {
 public:
  Tensor forward(const Tensor& x, bool keep);
  Tensor backward(const Tensor& dy) const;

 private:
  Tensor x_;
};

/// Multi-head self-attention over sequences of equal length packed as [n_seq * T, E].
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(const std::string& name, int dim, int heads, Rng& rng);

  Tensor forward(const Tensor& x, int seq_len, bool keep);
  Tensor backward(const Tensor& dy, bool need_dx);
  void collect(ParamList& out) { qkv_.collect(out); proj_.collect(out); }
  void set_group(int group, bool backbone);

 private:
  int dim_ = 0;
  int heads_ = 1;
  int seq_len_ = 0;
  Linear qkv_;
  Linear proj_;
  Tensor qkv_out_;  // [n*T, 3E]
  Tensor attn_;     // [n, heads, T, T]
};

/// y + x for equally shaped tensors.
Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);

}  // namespace hybridct::nn

// SPDX-License-Identifier: Apache-2.0
#include "hybridct/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <utility>

#include <fmt/format.h>

#include "eigen_util.hpp"
#include "hybridct/core/error.hpp"

namespace hybridct::nn {

namespace {

void init_uniform(Tensor& t, double bound, Rng& rng) {
  std::uniform_real_distribution<float> dist(static_cast<float>(-bound), static_cast<float>(bound));
  for (float& v : t.values()) v = dist(rng);
}

void init_trunc_normal(Tensor& t, double std, Rng& rng) {
  std::normal_distribution<float> dist(0.0f, static_cast<float>(std));
  for (float& v : t.values()) {
    float x;
    do {
      x = dist(rng);
    } while (std::abs(x) > 2.0 * std);
    v = x;
  }
}

std::vector<int> with_last(std::vector<int> shape, int last) {
  shape.back() = last;
  return shape;
}

}  // namespace

// ---------------------------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in, int out, Rng& rng, Init init)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_(in), out_(out) {
  switch (init) {
    case Init::torch_default: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      init_uniform(weight.value, bound, rng);
      init_uniform(bias.value, bound, rng);
      break;
    }
    case Init::trunc_normal:
      init_trunc_normal(weight.value, 0.02, rng);
      break;
    case Init::zeros:
      break;
  }
}

void Linear::set_group(int group, bool backbone) {
  for (Parameter* p : {&weight, &bias}) {
    p->group = group;
    p->backbone = backbone;
  }
}

Tensor Linear::forward(const Tensor& x, bool keep) {
  if (x.rank() < 1 || x.shape().back() != in_)
    throw ValidationError(fmt::format("{}: expected last dimension {}, got {}", weight.name, in_,
                                      x.shape_string()));
  const int rows = static_cast<int>(x.size() / in_);
  Tensor y(with_last(x.shape(), out_));
  ConstMatMap X(x.data(), rows, in_);
  ConstMatMap W(weight.value.data(), out_, in_);
  MatMap Y(y.data(), rows, out_);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.value.data(), out_);
  if (keep) x_ = x;
  return y;
}

Tensor Linear::backward(const Tensor& dy, bool need_dx) {
  const int rows = static_cast<int>(dy.size() / out_);
  ConstMatMap DY(dy.data(), rows, out_);
  if (weight.trainable) {
    if (x_.size() != static_cast<std::size_t>(rows) * in_)
      throw RuntimeFailure(weight.name + ": backward without a cached forward");
    ConstMatMap X(x_.data(), rows, in_);
    MatMap(weight.grad.data(), out_, in_).noalias() += DY.transpose() * X;
    Eigen::Map<Eigen::RowVectorXf>(bias.grad.data(), out_) += DY.colwise().sum();
  }
  Tensor dx;
  if (need_dx) {
    dx = Tensor(with_last(dy.shape(), in_));
    ConstMatMap W(weight.value.data(), out_, in_);
    MatMap(dx.data(), rows, in_).noalias() = DY * W;
  }
  return dx;
}

// ---------------------------------------------------------------------------------- Conv3d

namespace {

struct Geometry {
  int C, D, H, W;
  int Do, Ho, Wo;
};

// Output positions [lo, hi) whose input index o * stride + off lies in [0, n).
std::pair<int, int> valid_range(int n_out, int n, int stride, int off) {
  int lo = 0;
  while (lo < n_out && lo * stride + off < 0) ++lo;
  int hi = n_out;
  while (hi > lo && (hi - 1) * stride + off >= n) --hi;
  return {lo, hi};
}

void im2col(const float* x, const Geometry& g, const Conv3dSpec& s, float* col) {
  const int kd = s.kernel[0], kh = s.kernel[1], kw = s.kernel[2];
  const std::size_t plane_out = static_cast<std::size_t>(g.Ho) * g.Wo;
  const std::size_t P = static_cast<std::size_t>(g.Do) * plane_out;
  for (int c = 0; c < g.C; ++c)
    for (int a = 0; a < kd; ++a)
      for (int b = 0; b < kh; ++b)
        for (int e = 0; e < kw; ++e) {
          const int sw = s.stride[2];
          const int off = e - s.padding[2];
          const auto [lo, hi] = valid_range(g.Wo, g.W, sw, off);
          float* row = col + ((((static_cast<std::size_t>(c) * kd + a) * kh + b) * kw + e)) * P;
          for (int od = 0; od < g.Do; ++od) {
            const int id = od * s.stride[0] - s.padding[0] + a;
            float* rd = row + od * plane_out;
            if (id < 0 || id >= g.D) {
              std::fill_n(rd, plane_out, 0.0f);
              continue;
            }
            for (int oh = 0; oh < g.Ho; ++oh) {
              const int ih = oh * s.stride[1] - s.padding[1] + b;
              float* rh = rd + oh * g.Wo;
              if (ih < 0 || ih >= g.H) {
                std::fill_n(rh, g.Wo, 0.0f);
                continue;
              }
              const float* src = x + (static_cast<std::size_t>(c) * g.D + id) * g.H * g.W +
                                 static_cast<std::size_t>(ih) * g.W;
              std::fill(rh, rh + lo, 0.0f);
              if (sw == 1) {
                std::copy(src + lo + off, src + hi + off, rh + lo);
              } else {
                for (int ow = lo; ow < hi; ++ow) rh[ow] = src[ow * sw + off];
              }
              std::fill(rh + hi, rh + g.Wo, 0.0f);
            }
          }
        }
}

void col2im(const float* col, const Geometry& g, const Conv3dSpec& s, float* dx) {
  const int kd = s.kernel[0], kh = s.kernel[1], kw = s.kernel[2];
  const std::size_t plane_out = static_cast<std::size_t>(g.Ho) * g.Wo;
  const std::size_t P = static_cast<std::size_t>(g.Do) * plane_out;
  for (int c = 0; c < g.C; ++c)
    for (int a = 0; a < kd; ++a)
      for (int b = 0; b < kh; ++b)
        for (int e = 0; e < kw; ++e) {
          const int sw = s.stride[2];
          const int off = e - s.padding[2];
          const auto [lo, hi] = valid_range(g.Wo, g.W, sw, off);
          const float* row = col + ((((static_cast<std::size_t>(c) * kd + a) * kh + b) * kw + e)) * P;
          for (int od = 0; od < g.Do; ++od) {
            const int id = od * s.stride[0] - s.padding[0] + a;
            if (id < 0 || id >= g.D) continue;
            for (int oh = 0; oh < g.Ho; ++oh) {
              const int ih = oh * s.stride[1] - s.padding[1] + b;
              if (ih < 0 || ih >= g.H) continue;
              const float* rh = row + od * plane_out + oh * g.Wo;
              float* dst = dx + (static_cast<std::size_t>(c) * g.D + id) * g.H * g.W +
                           static_cast<std::size_t>(ih) * g.W;
              if (sw == 1) {
                float* d = dst + off;
                for (int ow = lo; ow < hi; ++ow) d[ow] += rh[ow];
              } else {
                for (int ow = lo; ow < hi; ++ow) dst[ow * sw + off] += rh[ow];
              }
            }
          }
        }
}

}  // namespace

Conv3d::Conv3d(const std::string& name, const Conv3dSpec& spec, Rng& rng)
    : weight(name + ".weight",
             {spec.out_channels, spec.in_channels, spec.kernel[0], spec.kernel[1], spec.kernel[2]}),
      spec_(spec) {
  // Kaiming normal, fan_out, ReLU gain.
  const double fan_out = static_cast<double>(spec.out_channels) * spec.kernel[0] * spec.kernel[1] * spec.kernel[2];
  std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_out)));
  for (float& v : weight.value.values()) v = dist(rng);
}

std::array<int, 3> Conv3d::out_dims(const Tensor& x) const {
  std::array<int, 3> o{};
  for (int i = 0; i < 3; ++i)
    o[i] = (x.dim(2 + i) + 2 * spec_.padding[i] - spec_.kernel[i]) / spec_.stride[i] + 1;
  return o;
}

Tensor Conv3d::forward(const Tensor& x, bool keep) {
  if (x.rank() != 5 || x.dim(1) != spec_.in_channels)
    throw ValidationError(fmt::format("{}: expected [N, {}, D, H, W], got {}", weight.name,
                                      spec_.in_channels, x.shape_string()));
  const auto o = out_dims(x);
  const Geometry g{x.dim(1), x.dim(2), x.dim(3), x.dim(4), o[0], o[1], o[2]};
  const int N = x.dim(0);
  const int Co = spec_.out_channels;
  const int K = static_cast<int>(weight.value.size() / Co);
  const int P = g.Do * g.Ho * g.Wo;
  Tensor y({N, Co, g.Do, g.Ho, g.Wo});
  std::vector<float> col(static_cast<std::size_t>(K) * P);
  ConstMatMap Wm(weight.value.data(), Co, K);
  const std::size_t in_stride = x.row_size();
  for (int n = 0; n < N; ++n) {
    im2col(x.data() + n * in_stride, g, spec_, col.data());
    MatMap(y.data() + static_cast<std::size_t>(n) * Co * P, Co, P).noalias() =
        Wm * ConstMatMap(col.data(), K, P);
  }
  if (keep) x_ = x;
  return y;
}

Tensor Conv3d::backward(const Tensor& dy, bool need_dx) {
  if (x_.empty()) throw RuntimeFailure(weight.name + ": backward without a cached forward");
  const auto o = out_dims(x_);
  const Geometry g{x_.dim(1), x_.dim(2), x_.dim(3), x_.dim(4), o[0], o[1], o[2]};
  const int N = x_.dim(0);
  const int Co = spec_.out_channels;
  const int K = static_cast<int>(weight.value.size() / Co);
  const int P = g.Do * g.Ho * g.Wo;
  Tensor dx;
  if (need_dx) dx = Tensor(x_.shape());
  if (!weight.trainable && !need_dx) return dx;
  std::vector<float> col(static_cast<std::size_t>(K) * P);
  ConstMatMap Wm(weight.value.data(), Co, K);
  MatMap dW(weight.grad.data(), Co, K);
  const std::size_t in_stride = x_.row_size();
  for (int n = 0; n < N; ++n) {
    ConstMatMap DY(dy.data() + static_cast<std::size_t>(n) * Co * P, Co, P);
    if (weight.trainable) {
      im2col(x_.data() + n * in_stride, g, spec_, col.data());
      dW.noalias() += DY * ConstMatMap(col.data(), K, P).transpose();
    }
    if (need_dx) {
      MatMap(col.data(), K, P).noalias() = Wm.transpose() * DY;
      col2im(col.data(), g, spec_, dx.data() + n * in_stride);
    }
  }
  return dx;
}

// ------------------------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(const std::string& name, int channels)
    : gamma(name + ".weight", {channels}),
      beta(name + ".bias", {channels}),
      running_mean({channels}),
      running_var({channels}, 1.0f),
      name_(name) {
  gamma.value.fill(1.0f);
}

void BatchNorm::collect_buffers(BufferList& out) {
  out.push_back({name_ + ".running_mean", &running_mean});
  out.push_back({name_ + ".running_var", &running_var});
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
  const int N = x.dim(0);
  const int C = x.dim(1);
  if (C != static_cast<int>(gamma.value.size()))
    throw ValidationError(fmt::format("{}: expected {} channels, got {}", name_, gamma.value.size(), C));
  const std::size_t S = x.row_size() / C;
  const std::size_t M = static_cast<std::size_t>(N) * S;
  Tensor y(x.shape());
  used_batch_stats_ = training && gamma.trainable;
  if (used_batch_stats_) {
    xhat_ = Tensor(x.shape());
    inv_std_.assign(C, 0.0);
  }
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (used_batch_stats_) {
      double sum = 0.0, sq = 0.0;
      for (int n = 0; n < N; ++n) {
        const float* p = x.data() + (static_cast<std::size_t>(n) * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) {
          sum += p[i];
          sq += static_cast<double>(p[i]) * p[i];
        }
      }
      mean = sum / M;
      var = sq / M - mean * mean;
      if (var < 0.0) var = 0.0;
      const double unbiased = M > 1 ? var * M / (M - 1) : var;
      running_mean[c] = static_cast<float>((1 - momentum) * running_mean[c] + momentum * mean);
      running_var[c] = static_cast<float>((1 - momentum) * running_var[c] + momentum * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps);
    if (used_batch_stats_) inv_std_[c] = inv;
    const float g = gamma.value[c], b = beta.value[c];
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
      const float* p = x.data() + off;
      float* q = y.data() + off;
      for (std::size_t i = 0; i < S; ++i) {
        const float xh = static_cast<float>((p[i] - mean) * inv);
        if (used_batch_stats_) xhat_[off + i] = xh;
        q[i] = g * xh + b;
      }
    }
  }
  if (!used_batch_stats_ && training) {
    // Frozen layer in a training pass: still need xhat for dx.
    xhat_ = Tensor(x.shape());
    inv_std_.assign(C, 0.0);
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(running_var[c] + eps);
      inv_std_[c] = inv;
      for (int n = 0; n < N; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
        for (std::size_t i = 0; i < S; ++i)
          xhat_[off + i] = static_cast<float>((x[off + i] - running_mean[c]) * inv);
      }
    }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy, bool need_dx) {
  if (xhat_.empty()) throw RuntimeFailure(name_ + ": backward without a cached forward");
  const int N = dy.dim(0);
  const int C = dy.dim(1);
  const std::size_t S = dy.row_size() / C;
  const double M = static_cast<double>(N) * S;
  Tensor dx;
  if (need_dx) dx = Tensor(dy.shape());
  for (int c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        sum_dy += dy[off + i];
        sum_dy_xhat += static_cast<double>(dy[off + i]) * xhat_[off + i];
      }
    }
    if (gamma.trainable) {
      gamma.grad[c] += static_cast<float>(sum_dy_xhat);
      beta.grad[c] += static_cast<float>(sum_dy);
    }
    if (!need_dx) continue;
    const double g = gamma.value[c];
    const double inv = inv_std_[c];
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        double v;
        if (used_batch_stats_)
          v = g * inv * (dy[off + i] - sum_dy / M - xhat_[off + i] * sum_dy_xhat / M);
        else
          v = g * inv * dy[off + i];
        dx[off + i] = static_cast<float>(v);
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(const std::string& name, int dim)
    : gamma(name + ".weight", {dim}), beta(name + ".bias", {dim}), dim_(dim) {
  gamma.value.fill(1.0f);
}

void LayerNorm::set_group(int group, bool backbone) {
  for (Parameter* p : {&gamma, &beta}) {
    p->group = group;
    p->backbone = backbone;
  }
}

Tensor LayerNorm::forward(const Tensor& x, bool keep) {
  if (x.shape().back() != dim_) throw ValidationError(gamma.name + ": dimension mismatch");
  const std::size_t rows = x.size() / dim_;
  Tensor y(x.shape());
  if (keep) {
    xhat_ = Tensor(x.shape());
    inv_std_.assign(rows, 0.0f);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const float* p = x.data() + r * dim_;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < dim_; ++i) sum += p[i];
    const double mean = sum / dim_;
    for (int i = 0; i < dim_; ++i) sq += (p[i] - mean) * (p[i] - mean);
    const double inv = 1.0 / std::sqrt(sq / dim_ + eps);
    float* q = y.data() + r * dim_;
    for (int i = 0; i < dim_; ++i) {
      const float xh = static_cast<float>((p[i] - mean) * inv);
      if (keep) xhat_[r * dim_ + i] = xh;
      q[i] = gamma.value[i] * xh + beta.value[i];
    }
    if (keep) inv_std_[r] = static_cast<float>(inv);
  }
  return y;
}

Tensor LayerNorm::backward(const Tensor& dy, bool need_dx) {
  const std::size_t rows = dy.size() / dim_;
  if (xhat_.size() != dy.size()) throw RuntimeFailure(gamma.name + ": backward without a cached forward");
  if (gamma.trainable) {
    for (std::size_t r = 0; r < rows; ++r)
      for (int i = 0; i < dim_; ++i) {
        gamma.grad[i] += dy[r * dim_ + i] * xhat_[r * dim_ + i];
        beta.grad[i] += dy[r * dim_ + i];
      }
  }
  Tensor dx;
  if (!need_dx) return dx;
  dx = Tensor(dy.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double g = static_cast<double>(dy[r * dim_ + i]) * gamma.value[i];
      s1 += g;
      s2 += g * xhat_[r * dim_ + i];
    }
    const double inv = inv_std_[r];
    for (int i = 0; i < dim_; ++i) {
      const double g = static_cast<double>(dy[r * dim_ + i]) * gamma.value[i];
      dx[r * dim_ + i] = static_cast<float>(inv * (g - s1 / dim_ - xhat_[r * dim_ + i] * s2 / dim_));
    }
  }
  return dx;
}

// --------------------------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x, bool keep) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] < 0.0f ? 0.0f : x[i];
  if (keep) y_ = y;
  return y;
}

Tensor ReLU::backward(const Tensor& dy) const {
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y_[i] == 0.0f ? 0.0f : dy[i];
  return dx;
}

Tensor GELU::forward(const Tensor& x, bool keep) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = 0.5f * x[i] * (1.0f + std::erf(x[i] * static_cast<float>(std::numbers::sqrt2 / 2)));
  if (keep) x_ = x;
  return y;
}

Tensor GELU::backward(const Tensor& dy) const {
  Tensor dx(dy.shape());
  const float inv_sqrt2pi = static_cast<float>(1.0 / std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const float x = x_[i];
    const float cdf = 0.5f * (1.0f + std::erf(x * static_cast<float>(std::numbers::sqrt2 / 2)));
    const float pdf = inv_sqrt2pi * std::exp(-0.5f * x * x);
    dx[i] = dy[i] * (cdf + x * pdf);
  }
  return dx;
}

// ---------------------------------------------------------------------------- attention

SelfAttention::SelfAttention(const std::string& name, int dim, int heads, Rng& rng)
    : dim_(dim),
      heads_(heads),
      qkv_(name + ".qkv", dim, 3 * dim, rng, Init::trunc_normal),
      proj_(name + ".proj", dim, dim, rng, Init::trunc_normal) {
  HYBRIDCT_REQUIRE(heads >= 1 && dim % heads == 0, "embedding dim must be divisible by the head count");
}

void SelfAttention::set_group(int group, bool backbone) {
  qkv_.set_group(group, backbone);
  proj_.set_group(group, backbone);
}

Tensor SelfAttention::forward(const Tensor& x, int seq_len, bool keep) {
  const int rows = static_cast<int>(x.size() / dim_);
  HYBRIDCT_REQUIRE(seq_len > 0 && rows % seq_len == 0, "token count is not a multiple of seq_len");
  const int n_seq = rows / seq_len;
  const int T = seq_len;
  const int dh = dim_ / heads_;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  Tensor qkv = qkv_.forward(x, keep);
  Tensor ctx({rows, dim_});
  Tensor attn;
  if (keep) attn = Tensor({n_seq, heads_, T, T});
  RowMat S(T, T);
  const Eigen::OuterStride<> s3(3 * dim_);
  const Eigen::OuterStride<> s1(dim_);
  for (int n = 0; n < n_seq; ++n) {
    const float* base = qkv.data() + static_cast<std::size_t>(n) * T * 3 * dim_;
    for (int h = 0; h < heads_; ++h) {
      ConstStridedMap Q(base + h * dh, T, dh, s3);
      ConstStridedMap K(base + dim_ + h * dh, T, dh, s3);
      ConstStridedMap V(base + 2 * dim_ + h * dh, T, dh, s3);
      S.noalias() = (Q * K.transpose()) * scale;
      for (int r = 0; r < T; ++r) {
        const float mx = S.row(r).maxCoeff();
        S.row(r) = (S.row(r).array() - mx).exp();
        S.row(r) /= S.row(r).sum();
      }
      StridedMap(ctx.data() + static_cast<std::size_t>(n) * T * dim_ + h * dh, T, dh, s1).noalias() = S * V;
      if (keep)
        MatMap(attn.data() + (static_cast<std::size_t>(n) * heads_ + h) * T * T, T, T) = S;
    }
  }
  if (keep) {
    qkv_out_ = std::move(qkv);
    attn_ = std::move(attn);
    seq_len_ = T;
  }
  Tensor out = proj_.forward(ctx, keep);
  out.reshape(x.shape());
  return out;
}

Tensor SelfAttention::backward(const Tensor& dy, bool need_dx) {
  const int rows = static_cast<int>(dy.size() / dim_);
  const int T = seq_len_;
  const int n_seq = rows / T;
  const int dh = dim_ / heads_;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  Tensor dctx = proj_.backward(dy, true);
  Tensor dqkv({rows, 3 * dim_});
  RowMat dA(T, T), dS(T, T);
  const Eigen::OuterStride<> s3(3 * dim_);
  const Eigen::OuterStride<> s1(dim_);
  for (int n = 0; n < n_seq; ++n) {
    const float* base = qkv_out_.data() + static_cast<std::size_t>(n) * T * 3 * dim_;
    float* dbase = dqkv.data() + static_cast<std::size_t>(n) * T * 3 * dim_;
    for (int h = 0; h < heads_; ++h) {
      ConstStridedMap Q(base + h * dh, T, dh, s3);
      ConstStridedMap K(base + dim_ + h * dh, T, dh, s3);
      ConstStridedMap V(base + 2 * dim_ + h * dh, T, dh, s3);
      ConstMatMap A(attn_.data() + (static_cast<std::size_t>(n) * heads_ + h) * T * T, T, T);
      ConstStridedMap dO(dctx.data() + static_cast<std::size_t>(n) * T * dim_ + h * dh, T, dh, s1);
      dA.noalias() = dO * V.transpose();
      StridedMap(dbase + 2 * dim_ + h * dh, T, dh, s3).noalias() = A.transpose() * dO;
      for (int r = 0; r < T; ++r) {
        const float dot = dA.row(r).dot(A.row(r));
        dS.row(r) = A.row(r).array() * (dA.row(r).array() - dot);
      }
      StridedMap(dbase + h * dh, T, dh, s3).noalias() = (dS * K) * scale;
      StridedMap(dbase + dim_ + h * dh, T, dh, s3).noalias() = (dS.transpose() * Q) * scale;
    }
  }
  Tensor dx = qkv_.backward(dqkv, need_dx);
  if (need_dx) dx.reshape(dy.shape());
  return dx;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  HYBRIDCT_REQUIRE(a.size() == b.size(), "add: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace hybridct::nn

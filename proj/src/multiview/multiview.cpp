// SPDX-License-Identifier: Apache-2.0
#include "hybridct/multiview/multiview.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::multiview {

const char* view_name(View v) {
  switch (v) {
    case View::axial: return "axial";
    case View::coronal: return "coronal";
    case View::sagittal: return "sagittal";
  }
  return "?";
}

void ViewCfg::validate() const {
  HYBRIDCT_REQUIRE(k_slices >= 1, "k_slices must be >= 1");
  HYBRIDCT_REQUIRE(slice_size >= 16, "slice_size must be >= 16");
}

float* ViewSet::slice(int view, int i, int channel) {
  const std::size_t s2 = static_cast<std::size_t>(slice_size()) * slice_size();
  return data.data() + ((static_cast<std::size_t>(view) * k() + i) * kChannels + channel) * s2;
}

const float* ViewSet::slice(int view, int i, int channel) const {
  return const_cast<ViewSet*>(this)->slice(view, i, channel);
}

std::vector<int> sample_indices(int axis_len, int k) {
  HYBRIDCT_REQUIRE(axis_len >= 1 && k >= 1, "sample_indices needs axis_len >= 1 and k >= 1");
  std::vector<int> out(k);
  if (k == 1) {
    out[0] = axis_len / 2;
    return out;
  }
  const double start = 0.1 * axis_len;
  const double span = 0.8 * axis_len - 1.0;
  for (int i = 0; i < k; ++i) {
    const long idx = std::lround(start + span * i / (k - 1));
    out[i] = static_cast<int>(std::clamp(idx, 0L, static_cast<long>(axis_len - 1)));
  }
  // Clamping can only break monotonicity for degenerate lengths; keep the sequence non-decreasing.
  for (int i = 1; i < k; ++i) out[i] = std::max(out[i], out[i - 1]);
  return out;
}

Slice2D plane(const Volume& vol, View view, int index) {
  Slice2D s;
  switch (view) {
    case View::axial:
      s.height = vol.height;
      s.width = vol.width;
      s.pixels.assign(vol.data.begin() + vol.index(index, 0, 0),
                      vol.data.begin() + vol.index(index, 0, 0) + s.height * s.width);
      break;
    case View::coronal:
      s.height = vol.depth;
      s.width = vol.width;
      s.pixels.resize(static_cast<std::size_t>(s.height) * s.width);
      for (int d = 0; d < vol.depth; ++d)
        for (int w = 0; w < vol.width; ++w) s.pixels[d * s.width + w] = vol.at(d, index, w);
      break;
    case View::sagittal:
      s.height = vol.depth;
      s.width = vol.height;
      s.pixels.resize(static_cast<std::size_t>(s.height) * s.width);
      for (int d = 0; d < vol.depth; ++d)
        for (int h = 0; h < vol.height; ++h) s.pixels[d * s.width + h] = vol.at(d, h, index);
      break;
  }
  return s;
}

Slice2D resize_bilinear(const Slice2D& img, int out_h, int out_w) {
  HYBRIDCT_REQUIRE(img.height > 0 && img.width > 0 && !img.pixels.empty(), "cannot resize an empty slice");
  HYBRIDCT_REQUIRE(out_h > 0 && out_w > 0, "resize target must be positive");
  Slice2D out{out_h, out_w, std::vector<float>(static_cast<std::size_t>(out_h) * out_w)};
  auto src_coord = [](int i, int in, int out) {
    const double x = (i + 0.5) * static_cast<double>(in) / out - 0.5;
    return std::clamp(x, 0.0, static_cast<double>(in - 1));
  };
  for (int r = 0; r < out_h; ++r) {
    const double y = src_coord(r, img.height, out_h);
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = y - y0;
    for (int c = 0; c < out_w; ++c) {
      const double x = src_coord(c, img.width, out_w);
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double fx = x - x0;
      const double top = (1 - fx) * img.at(y0, x0) + fx * img.at(y0, x1);
      const double bot = (1 - fx) * img.at(y1, x0) + fx * img.at(y1, x1);
      out.pixels[static_cast<std::size_t>(r) * out_w + c] = static_cast<float>((1 - fy) * top + fy * bot);
    }
  }
  return out;
}

ViewSet extract_views(const Volume& vol, const ViewCfg& cfg) {
  cfg.validate();
  if (!vol.is_cubic())
    throw ValidationError(
        fmt::format("extract_views needs a cubic volume, got {}x{}x{}", vol.depth, vol.height, vol.width));
  HYBRIDCT_REQUIRE(cfg.k_slices <= vol.depth, "k_slices exceeds the volume side");
  const int k = cfg.k_slices;
  const int s = cfg.slice_size;
  ViewSet vs;
  vs.data = Tensor({kNumViews, k, kChannels, s, s});
  const std::size_t s2 = static_cast<std::size_t>(s) * s;
  for (int v = 0; v < kNumViews; ++v) {
    vs.source_indices[v] = sample_indices(vol.depth, k);
    for (int i = 0; i < k; ++i) {
      const Slice2D resized = resize_bilinear(plane(vol, static_cast<View>(v), vs.source_indices[v][i]), s, s);
      for (int c = 0; c < kChannels; ++c) std::copy_n(resized.pixels.begin(), s2, vs.slice(v, i, c));
    }
  }
  return vs;
}

void standardize(float* slices, int n_slices, int size, const ChannelNorm& norm) {
  const std::size_t s2 = static_cast<std::size_t>(size) * size;
  for (int n = 0; n < n_slices; ++n) {
    for (int c = 0; c < kChannels; ++c) {
      float* p = slices + (static_cast<std::size_t>(n) * kChannels + c) * s2;
      const float inv = 1.0f / norm.std[c];
      for (std::size_t i = 0; i < s2; ++i) p[i] = (p[i] / 255.0f - norm.mean[c]) * inv;
    }
  }
}

Tensor prepare_slice(const Slice2D& slice, int slice_size, const ChannelNorm& norm) {
  HYBRIDCT_REQUIRE(!slice.pixels.empty(), "cannot prepare an empty slice");
  const Slice2D resized = resize_bilinear(slice, slice_size, slice_size);
  Tensor out({kChannels, slice_size, slice_size});
  const std::size_t s2 = static_cast<std::size_t>(slice_size) * slice_size;
  for (int c = 0; c < kChannels; ++c) std::copy_n(resized.pixels.begin(), s2, out.data() + c * s2);
  standardize(out.data(), 1, slice_size, norm);
  return out;
}

}  // namespace hybridct::multiview

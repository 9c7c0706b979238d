// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "hybridct/core/tensor.hpp"
#include "hybridct/core/volume.hpp"

namespace hybridct::multiview {

enum class View { axial = 0, coronal = 1, sagittal = 2 };
inline constexpr int kNumViews = 3;
inline constexpr int kChannels = 3;

const char* view_name(View v);

struct ViewCfg {
  int k_slices = 10;
  int slice_size = 224;

  void validate() const;
};

/// Single-channel image, row-major.
struct Slice2D {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

/// K slices per plane, each slice_size^2 with three identical channels, values in [0, 255].
/// `data` has shape [3 views, K, 3 channels, S, S].
struct ViewSet {
  Tensor data;
  std::array<std::vector<int>, kNumViews> source_indices;

  int k() const { return data.dim(1); }
  int slice_size() const { return data.dim(3); }
  float* slice(int view, int i, int channel = 0);
  const float* slice(int view, int i, int channel = 0) const;
};

/// Per-channel standardization applied after scaling to [0, 1].
struct ChannelNorm {
  std::array<float, kChannels> mean{0.485f, 0.456f, 0.406f};
  std::array<float, kChannels> std{0.229f, 0.224f, 0.225f};
};

/// k indices spread over the central 80% of an axis; k = 1 picks the centre.
std::vector<int> sample_indices(int axis_len, int k);

/// Plane `index` of `vol` along axis 0 (axial), 1 (coronal) or 2 (sagittal).
Slice2D plane(const Volume& vol, View view, int index);

/// Bilinear resize with half-pixel centres, clamped at the borders.
Slice2D resize_bilinear(const Slice2D& img, int out_h, int out_w);

/// Requires a cubic volume. Each sampled plane is resized and replicated to three channels.
ViewSet extract_views(const Volume& vol, const ViewCfg& cfg);

/// In-place: [0, 255] -> [0, 1] -> (x - mean[c]) / std[c] over a [.., 3, S, S] block of slices.
void standardize(float* slices, int n_slices, int size, const ChannelNorm& norm);

/// Resize, replicate to 3 channels, scale to [0, 1] and standardize. Returns [3, S, S].
Tensor prepare_slice(const Slice2D& slice, int slice_size, const ChannelNorm& norm = {});

}  // namespace hybridct::multiview

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hybridct/core/image.hpp"
#include "hybridct/core/volume.hpp"

namespace hybridct::preprocess {

/// Axial slices in acquisition order. All slices share one height x width.
struct SliceStack {
  std::vector<GrayImage> slices;
  std::vector<std::string> source_order;  // filename of each slice
};

struct PreprocCfg {
  int target_side = 128;
  double denoise_sigma = 1.0;
  double sharpen_amount = 0.5;
  double sharpen_sigma = 1.0;

  void validate() const;
};

/// Drops every slice byte-identical to an earlier one; first occurrences keep their order.
SliceStack dedup_slices(const SliceStack& stack);

/// Stacks slices along depth. Throws ValidationError naming the first slice whose size differs.
Volume reconstruct_volume(const SliceStack& stack);

/// Trilinear resampling to target_side^3 (half-pixel centers, clamped at the borders).
Volume resize_volume(const Volume& vol, int target_side);

/// Normalized, truncated (radius ceil(3 sigma)) 1D Gaussian taps, centre at index radius.
std::vector<double> gaussian_kernel(double sigma);

/// Half-sample symmetric reflection of an index into [0, n).
int reflect_index(int i, int n);

/// Separable 3D Gaussian with reflected borders.
Volume gaussian_denoise(const Volume& vol, double sigma);

/// Unsharp mask, clamped to the input's value range.
Volume sharpen(const Volume& vol, double amount, double sigma);

/// Per-volume min-max to [0, 255]; a constant volume maps to zeros.
Volume normalize_intensity(const Volume& vol);

/// Reads `*.png` files from a scan directory in lexicographic order.
SliceStack load_slice_stack(const std::filesystem::path& dir);

/// load -> dedup -> reconstruct -> resize -> denoise -> sharpen -> normalize.
Volume preprocess_stack(const SliceStack& stack, const PreprocCfg& cfg);
Volume preprocess_scan(const std::filesystem::path& stack_dir, const PreprocCfg& cfg);

/// `VOL1` + three little-endian uint32 dims (depth, height, width) + little-endian float32 voxels.
void write_volume(const std::filesystem::path& path, const Volume& vol);
Volume read_volume(const std::filesystem::path& path);
std::vector<char> serialize_volume(const Volume& vol);

/// Quantizes each axial slice to 8 bits and writes `slice_XXXX.png` files for inspection.
void export_volume_png(const std::filesystem::path& dir, const Volume& vol);

}  // namespace hybridct::preprocess

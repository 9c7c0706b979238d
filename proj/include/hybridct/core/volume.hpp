// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hybridct {

enum class VolumeStage { raw, resized, denoised, sharpened, normalized };

std::string to_string(VolumeStage s);

/// Dense depth x height x width intensity grid, row-major (depth slowest).
struct Volume {
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;
  VolumeStage stage = VolumeStage::raw;

  Volume() = default;
  Volume(int d, int h, int w, float fill = 0.0f, VolumeStage s = VolumeStage::raw)
      : depth(d), height(h), width(w), data(static_cast<std::size_t>(d) * h * w, fill), stage(s) {}

  std::size_t index(int d, int h, int w) const {
    return (static_cast<std::size_t>(d) * height + h) * width + w;
  }
  float& at(int d, int h, int w) { return data[index(d, h, w)]; }
  float at(int d, int h, int w) const { return data[index(d, h, w)]; }
  std::size_t voxels() const { return data.size(); }
  bool is_cubic() const { return depth == height && height == width; }
};

}  // namespace hybridct

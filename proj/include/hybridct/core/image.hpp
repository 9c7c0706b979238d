// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hybridct {

/// 8-bit single-channel image, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

void write_png_gray(const std::filesystem::path& path, const GrayImage& img);

/// Throws RuntimeFailure naming the path when the file is missing or not a decodable PNG.
GrayImage read_png_gray(const std::filesystem::path& path);

}  // namespace hybridct

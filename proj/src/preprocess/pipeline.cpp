// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"
#include "hybridct/preprocess/preprocess.hpp"

namespace hybridct::preprocess {

namespace fs = std::filesystem;

SliceStack dedup_slices(const SliceStack& stack) {
  SliceStack out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < stack.slices.size(); ++i) {
    const auto& s = stack.slices[i];
    // Key on shape + bytes so differently shaped slices never collide.
    std::string key(reinterpret_cast<const char*>(s.pixels.data()), s.pixels.size());
    key += fmt::format("#{}x{}", s.height, s.width);
    if (!seen.insert(std::move(key)).second) continue;
    out.slices.push_back(s);
    if (i < stack.source_order.size()) out.source_order.push_back(stack.source_order[i]);
  }
  return out;
}

Volume reconstruct_volume(const SliceStack& stack) {
  if (stack.slices.empty()) throw ValidationError("slice stack is empty");
  const int h = stack.slices.front().height;
  const int w = stack.slices.front().width;
  for (std::size_t i = 0; i < stack.slices.size(); ++i) {
    const auto& s = stack.slices[i];
    if (s.height != h || s.width != w)
      throw ValidationError(fmt::format("slice {} is {}x{}, expected {}x{}", i, s.height, s.width, h, w));
  }
  Volume vol(static_cast<int>(stack.slices.size()), h, w);
  for (std::size_t d = 0; d < stack.slices.size(); ++d) {
    const auto& px = stack.slices[d].pixels;
    std::transform(px.begin(), px.end(), vol.data.begin() + d * px.size(),
                   [](std::uint8_t v) { return static_cast<float>(v); });
  }
  return vol;
}

SliceStack load_slice_stack(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw RuntimeFailure("slice directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw RuntimeFailure("no slice images in " + dir.string());
  SliceStack stack;
  for (const auto& f : files) {
    stack.slices.push_back(read_png_gray(f));
    stack.source_order.push_back(f.filename().string());
  }
  return stack;
}

Volume preprocess_stack(const SliceStack& stack, const PreprocCfg& cfg) {
  cfg.validate();
  const auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(name) + ": " + e.what());
    } catch (const RuntimeFailure& e) {
      throw RuntimeFailure(std::string(name) + ": " + e.what());
    }
  };
  const SliceStack unique = dedup_slices(stack);
  Volume v = stage("reconstruct", [&] { return reconstruct_volume(unique); });
  v = stage("resize", [&] { return resize_volume(v, cfg.target_side); });
  v = stage("denoise", [&] { return gaussian_denoise(v, cfg.denoise_sigma); });
  v = stage("sharpen", [&] { return sharpen(v, cfg.sharpen_amount, cfg.sharpen_sigma); });
  return normalize_intensity(v);
}

Volume preprocess_scan(const fs::path& stack_dir, const PreprocCfg& cfg) {
  SliceStack stack;
  try {
    stack = load_slice_stack(stack_dir);
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure(std::string("load: ") + e.what());
  }
  return preprocess_stack(stack, cfg);
}

namespace {

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

std::vector<char> serialize_volume(const Volume& vol) {
  std::vector<char> buf;
  buf.reserve(16 + 4 * vol.voxels());
  buf.insert(buf.end(), {'V', 'O', 'L', '1'});
  put_u32(buf, static_cast<std::uint32_t>(vol.depth));
  put_u32(buf, static_cast<std::uint32_t>(vol.height));
  put_u32(buf, static_cast<std::uint32_t>(vol.width));
  for (float f : vol.data) put_u32(buf, std::bit_cast<std::uint32_t>(f));
  return buf;
}

void write_volume(const fs::path& path, const Volume& vol) {
  const auto buf = serialize_volume(vol);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write volume " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw RuntimeFailure("failed writing volume " + path.string());
}

Volume read_volume(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open volume " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), "VOL1", 4) != 0)
    throw RuntimeFailure("not a VOL1 file: " + path.string());
  const auto d = get_u32(buf.data() + 4);
  const auto h = get_u32(buf.data() + 8);
  const auto w = get_u32(buf.data() + 12);
  const std::size_t n = static_cast<std::size_t>(d) * h * w;
  if (buf.size() != 16 + 4 * n) throw RuntimeFailure("truncated volume file: " + path.string());
  Volume vol(static_cast<int>(d), static_cast<int>(h), static_cast<int>(w), 0.0f, VolumeStage::normalized);
  for (std::size_t i = 0; i < n; ++i) vol.data[i] = std::bit_cast<float>(get_u32(buf.data() + 16 + 4 * i));
  return vol;
}

void export_volume_png(const fs::path& dir, const Volume& vol) {
  fs::create_directories(dir);
  for (int d = 0; d < vol.depth; ++d) {
    GrayImage img{vol.height, vol.width, {}};
    img.pixels.resize(static_cast<std::size_t>(vol.height) * vol.width);
    for (int h = 0; h < vol.height; ++h)
      for (int w = 0; w < vol.width; ++w)
        img.pixels[static_cast<std::size_t>(h) * vol.width + w] =
            static_cast<std::uint8_t>(std::clamp(std::lround(vol.at(d, h, w)), 0L, 255L));
    write_png_gray(dir / fmt::format("slice_{:04d}.png", d), img);
  }
}

}  // namespace hybridct::preprocess

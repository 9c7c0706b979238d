// SPDX-License-Identifier: Apache-2.0
#include "hybridct/train/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "hybridct/core/error.hpp"

namespace hybridct::train {

void AugCfg::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0; };
  HYBRIDCT_REQUIRE(ok(rot_deg) && rot_deg <= 180, "rot_deg must be in [0, 180]");
  HYBRIDCT_REQUIRE(ok(hflip_p) && hflip_p <= 1, "hflip_p must be in [0, 1]");
  HYBRIDCT_REQUIRE(ok(scale_min) && scale_min > 0 && std::isfinite(scale_max) && scale_max >= scale_min,
                   "scale range must satisfy 0 < min <= max");
  HYBRIDCT_REQUIRE(ok(brightness) && ok(contrast) && contrast < 1, "brightness/contrast jitter must be >= 0 (contrast < 1)");
  HYBRIDCT_REQUIRE(ok(noise_sigma), "noise_sigma must be >= 0");
  HYBRIDCT_REQUIRE(ok(cutout_frac) && cutout_frac < 1, "cutout_frac must be in [0, 1)");
  HYBRIDCT_REQUIRE(ok(op_p) && op_p <= 1, "op_p must be in [0, 1]");
}

AugCfg AugCfg::none() { return {0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0}; }

AugParams draw_params(const AugCfg& cfg, int size, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AugParams p;
  p.flip = u(rng) < cfg.hflip_p;
  if (u(rng) < cfg.op_p) {
    p.angle_rad = (2.0 * u(rng) - 1.0) * cfg.rot_deg * std::numbers::pi / 180.0;
    p.scale = cfg.scale_min + u(rng) * (cfg.scale_max - cfg.scale_min);
  }
  if (u(rng) < cfg.op_p) {
    p.brightness = (2.0 * u(rng) - 1.0) * cfg.brightness;
    p.contrast = (2.0 * u(rng) - 1.0) * cfg.contrast;
  }
  if (u(rng) < cfg.op_p) p.noise_sigma = cfg.noise_sigma;
  if (u(rng) < cfg.op_p) {
    p.cutout_side = static_cast<int>(std::lround(size * std::sqrt(cfg.cutout_frac)));
    if (p.cutout_side > 0) {
      p.cutout_row = std::uniform_int_distribution<int>(0, size - p.cutout_side)(rng);
      p.cutout_col = std::uniform_int_distribution<int>(0, size - p.cutout_side)(rng);
    }
  }
  return p;
}

void augment_image(float* img, int size, const AugParams& p, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(size) * size;
  if (p.flip)
    for (int r = 0; r < size; ++r) std::reverse(img + static_cast<std::size_t>(r) * size, img + (r + 1) * static_cast<std::size_t>(size));

  if (p.angle_rad != 0.0 || p.scale != 1.0) {
    // Inverse map each output pixel centre through rotation and zoom about the image centre.
    const std::vector<float> src(img, img + n);
    const double c = 0.5 * (size - 1);
    const double cs = std::cos(p.angle_rad) / p.scale;
    const double sn = std::sin(p.angle_rad) / p.scale;
    auto at = [&](int r, int col) -> double {
      if (r < 0 || r >= size || col < 0 || col >= size) return 0.0;
      return src[static_cast<std::size_t>(r) * size + col];
    };
    for (int r = 0; r < size; ++r)
      for (int col = 0; col < size; ++col) {
        const double y = r - c;
        const double x = col - c;
        const double sy = cs * y - sn * x + c;
        const double sx = sn * y + cs * x + c;
        const int y0 = static_cast<int>(std::floor(sy));
        const int x0 = static_cast<int>(std::floor(sx));
        const double wy = sy - y0;
        const double wx = sx - x0;
        img[static_cast<std::size_t>(r) * size + col] = static_cast<float>(
            (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) + wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1)));
      }
  }

  if (p.brightness != 0.0 || p.contrast != 0.0) {
    const double gain = 1.0 + p.contrast;
    const double shift = p.brightness * 255.0;
    for (std::size_t i = 0; i < n; ++i) img[i] = static_cast<float>((img[i] - 127.5) * gain + 127.5 + shift);
  }
  if (p.noise_sigma > 0) {
    std::normal_distribution<float> g(0.0f, static_cast<float>(p.noise_sigma * 255.0));
    for (std::size_t i = 0; i < n; ++i) img[i] += g(rng);
  }
  for (int r = p.cutout_row; r < p.cutout_row + p.cutout_side; ++r)
    std::fill_n(img + static_cast<std::size_t>(r) * size + p.cutout_col, p.cutout_side, 0.0f);
  for (std::size_t i = 0; i < n; ++i) img[i] = std::clamp(img[i], 0.0f, 255.0f);
}

void augment(multiview::ViewSet& views, const AugCfg& cfg, Rng& rng) {
  const int S = views.slice_size();
  const std::size_t n = static_cast<std::size_t>(S) * S;
  for (int v = 0; v < multiview::kNumViews; ++v) {
    const AugParams p = draw_params(cfg, S, rng);
    for (int i = 0; i < views.k(); ++i) {
      float* c0 = views.slice(v, i, 0);
      augment_image(c0, S, p, rng);
      for (int ch = 1; ch < multiview::kChannels; ++ch) std::copy_n(c0, n, views.slice(v, i, ch));
    }
  }
}

void augment(Volume& vol, const AugCfg& cfg, Rng& rng) {
  HYBRIDCT_REQUIRE(vol.height == vol.width, "volume augmentation needs square axial planes");
  const AugParams p = draw_params(cfg, vol.width, rng);
  const std::size_t plane = static_cast<std::size_t>(vol.height) * vol.width;
  for (int d = 0; d < vol.depth; ++d) augment_image(vol.data.data() + d * plane, vol.width, p, rng);
}

}  // namespace hybridct::train

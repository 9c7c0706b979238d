// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "hybridct/core/error.hpp"
#include "hybridct/preprocess/preprocess.hpp"

namespace hybridct::preprocess {

void PreprocCfg::validate() const {
  HYBRIDCT_REQUIRE(target_side >= 8, "target_side must be >= 8");
  HYBRIDCT_REQUIRE(denoise_sigma > 0 && std::isfinite(denoise_sigma), "denoise_sigma must be > 0");
  HYBRIDCT_REQUIRE(sharpen_sigma > 0 && std::isfinite(sharpen_sigma), "sharpen_sigma must be > 0");
  HYBRIDCT_REQUIRE(sharpen_amount >= 0 && std::isfinite(sharpen_amount), "sharpen_amount must be >= 0");
}

namespace {

struct AxisSampling {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

AxisSampling axis_sampling(int in, int out) {
  AxisSampling s;
  s.lo.resize(out);
  s.hi.resize(out);
  s.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double x = (i + 0.5) * scale - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(x));
    s.lo[i] = lo;
    s.hi[i] = std::min(lo + 1, in - 1);
    s.frac[i] = x - lo;
  }
  return s;
}

// One pass of a 1D convolution along `axis` (0 = depth, 1 = height, 2 = width).
void convolve_axis(const std::vector<double>& src, std::vector<double>& dst, int dims[3], int axis,
                   const std::vector<double>& taps) {
  const int radius = static_cast<int>(taps.size() / 2);
  const int n = dims[axis];
  const std::size_t stride = axis == 0 ? static_cast<std::size_t>(dims[1]) * dims[2]
                                       : (axis == 1 ? static_cast<std::size_t>(dims[2]) : 1);
  const std::size_t lines = src.size() / n;
  std::vector<double> line(n);
  for (std::size_t l = 0; l < lines; ++l) {
    // Base offset of this line: decompose l over the two non-axis dimensions.
    std::size_t base;
    if (axis == 0) {
      base = l;
    } else if (axis == 1) {
      const std::size_t d = l / dims[2];
      const std::size_t w = l % dims[2];
      base = d * static_cast<std::size_t>(dims[1]) * dims[2] + w;
    } else {
      base = l * static_cast<std::size_t>(dims[2]);
    }
    for (int i = 0; i < n; ++i) line[i] = src[base + i * stride];
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) acc += taps[t + radius] * line[reflect_index(i + t, n)];
      dst[base + i * stride] = acc;
    }
  }
}

std::vector<double> smooth(const Volume& vol, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  std::vector<double> a(vol.data.begin(), vol.data.end());
  std::vector<double> b(a.size());
  int dims[3] = {vol.depth, vol.height, vol.width};
  convolve_axis(a, b, dims, 2, taps);
  convolve_axis(b, a, dims, 1, taps);
  convolve_axis(a, b, dims, 0, taps);
  return b;
}

}  // namespace

Volume resize_volume(const Volume& vol, int target_side) {
  HYBRIDCT_REQUIRE(target_side >= 1, "target_side must be >= 1");
  HYBRIDCT_REQUIRE(vol.voxels() > 0, "cannot resize an empty volume");
  const AxisSampling sd = axis_sampling(vol.depth, target_side);
  const AxisSampling sh = axis_sampling(vol.height, target_side);
  const AxisSampling sw = axis_sampling(vol.width, target_side);
  Volume out(target_side, target_side, target_side, 0.0f, VolumeStage::resized);
  for (int d = 0; d < target_side; ++d) {
    const double fd = sd.frac[d];
    for (int h = 0; h < target_side; ++h) {
      const double fh = sh.frac[h];
      for (int w = 0; w < target_side; ++w) {
        const double fw = sw.frac[w];
        auto lerp_w = [&](int dd, int hh) {
          return (1.0 - fw) * vol.at(dd, hh, sw.lo[w]) + fw * vol.at(dd, hh, sw.hi[w]);
        };
        auto lerp_hw = [&](int dd) {
          return (1.0 - fh) * lerp_w(dd, sh.lo[h]) + fh * lerp_w(dd, sh.hi[h]);
        };
        out.at(d, h, w) = static_cast<float>((1.0 - fd) * lerp_hw(sd.lo[d]) + fd * lerp_hw(sd.hi[d]));
      }
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  HYBRIDCT_REQUIRE(sigma > 0 && std::isfinite(sigma), "gaussian sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    taps[t + radius] = std::exp(-(t * t) / (2.0 * sigma * sigma));
    sum += taps[t + radius];
  }
  for (double& v : taps) v /= sum;
  return taps;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

Volume gaussian_denoise(const Volume& vol, double sigma) {
  HYBRIDCT_REQUIRE(sigma > 0 && std::isfinite(sigma), "denoise sigma must be > 0");
  const auto blurred = smooth(vol, sigma);
  Volume out = vol;
  out.stage = VolumeStage::denoised;
  for (std::size_t i = 0; i < blurred.size(); ++i) out.data[i] = static_cast<float>(blurred[i]);
  return out;
}

Volume sharpen(const Volume& vol, double amount, double sigma) {
  Volume out = vol;
  out.stage = VolumeStage::sharpened;
  if (vol.voxels() == 0 || amount == 0.0) return out;
  const auto [mn, mx] = std::minmax_element(vol.data.begin(), vol.data.end());
  const double lo = *mn;
  const double hi = *mx;
  const auto blurred = smooth(vol, sigma);
  for (std::size_t i = 0; i < blurred.size(); ++i) {
    const double v = vol.data[i];
    out.data[i] = static_cast<float>(std::clamp(v + amount * (v - blurred[i]), lo, hi));
  }
  return out;
}

Volume normalize_intensity(const Volume& vol) {
  Volume out = vol;
  out.stage = VolumeStage::normalized;
  if (vol.voxels() == 0) return out;
  const auto [mn, mx] = std::minmax_element(vol.data.begin(), vol.data.end());
  const double lo = *mn;
  const double hi = *mx;
  if (!(hi > lo)) {
    std::fill(out.data.begin(), out.data.end(), 0.0f);
    return out;
  }
  const double scale = 255.0 / (hi - lo);
  for (std::size_t i = 0; i < vol.data.size(); ++i) {
    const double v = (vol.data[i] - lo) * scale;
    out.data[i] = static_cast<float>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

}  // namespace hybridct::preprocess

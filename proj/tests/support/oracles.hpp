// SPDX-License-Identifier: Apache-2.0
// Slow scalar reference implementations. They share no code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hybridct/core/volume.hpp"

namespace hybridct::oracle {

// Mirror with the edge sample repeated: -1 -> 0, n -> n - 1.
inline int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = ((i % period) + period) % period;
  return m < n ? m : period - 1 - m;
}

inline std::vector<double> gauss_taps(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> t(2 * r + 1);
  double s = 0.0;
  for (int i = -r; i <= r; ++i) s += t[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : t) v /= s;
  return t;
}

// Direct (non-separable) 3D convolution with the product kernel.
inline std::vector<double> gaussian3d(const Volume& v, double sigma) {
  const auto g = gauss_taps(sigma);
  const int r = static_cast<int>(g.size() / 2);
  std::vector<double> out(v.voxels(), 0.0);
  for (int d = 0; d < v.depth; ++d)
    for (int h = 0; h < v.height; ++h)
      for (int w = 0; w < v.width; ++w) {
        double acc = 0.0;
        for (int a = -r; a <= r; ++a)
          for (int b = -r; b <= r; ++b)
            for (int c = -r; c <= r; ++c)
              acc += g[a + r] * g[b + r] * g[c + r] *
                     v.at(mirror(d + a, v.depth), mirror(h + b, v.height), mirror(w + c, v.width));
        out[v.index(d, h, w)] = acc;
      }
  return out;
}

// Value of the trilinear resample at output voxel (z, y, x); half-pixel centres, clamped.
inline double trilinear_at(const Volume& v, int side, int z, int y, int x) {
  auto axis = [&](int o, int n, int& i0, int& i1, double& f) {
    double c = (o + 0.5) * n / side - 0.5;
    c = std::min(std::max(c, 0.0), n - 1.0);
    i0 = static_cast<int>(std::floor(c));
    i1 = std::min(i0 + 1, n - 1);
    f = c - i0;
  };
  int z0, z1, y0, y1, x0, x1;
  double fz, fy, fx;
  axis(z, v.depth, z0, z1, fz);
  axis(y, v.height, y0, y1, fy);
  axis(x, v.width, x0, x1, fx);
  double acc = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const double w = (a ? fz : 1 - fz) * (b ? fy : 1 - fy) * (c ? fx : 1 - fx);
        acc += w * v.at(a ? z1 : z0, b ? y1 : y0, c ? x1 : x0);
      }
  return acc;
}

// Macro F1 from an explicit confusion matrix, one class at a time.
inline double macro_f1(const std::vector<int>& pred, const std::vector<int>& label, int n_classes) {
  std::vector<std::vector<long>> cm(n_classes, std::vector<long>(n_classes, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++cm[label[i]][pred[i]];
  double sum = 0.0;
  for (int k = 0; k < n_classes; ++k) {
    long tp = cm[k][k], fp = 0, fn = 0;
    for (int j = 0; j < n_classes; ++j) {
      if (j == k) continue;
      fp += cm[j][k];
      fn += cm[k][j];
    }
    const double p = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return sum / n_classes;
}

inline std::map<std::string, double> grouped_macro_f1(const std::vector<int>& pred, const std::vector<int>& label,
                                                      const std::vector<std::string>& group, int n_classes) {
  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> parts;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    parts[group[i]].first.push_back(pred[i]);
    parts[group[i]].second.push_back(label[i]);
  }
  std::map<std::string, double> out;
  for (const auto& [g, pl] : parts) out[g] = macro_f1(pl.first, pl.second, n_classes);
  return out;
}

}  // namespace hybridct::oracle

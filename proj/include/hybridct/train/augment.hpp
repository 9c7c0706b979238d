// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hybridct/core/rng.hpp"
#include "hybridct/core/volume.hpp"
#include "hybridct/multiview/multiview.hpp"

namespace hybridct::train {

/// Intensities are on the [0, 255] scale; noise_sigma and brightness are fractions of that range.
struct AugCfg {
  double rot_deg = 15.0;
  double hflip_p = 0.5;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double brightness = 0.1;
  double contrast = 0.1;
  double noise_sigma = 0.01;
  double cutout_frac = 0.10;
  /// Chance that each of the affine, intensity, noise and cutout transforms is applied.
  double op_p = 0.5;

  void validate() const;
  /// Every range collapsed so augment() is the identity.
  static AugCfg none();
};

/// One draw of the per-view (or per-volume) transform.
struct AugParams {
  bool flip = false;
  double angle_rad = 0.0;
  double scale = 1.0;
  double brightness = 0.0;
  double contrast = 0.0;
  double noise_sigma = 0.0;  // fraction of 255
  int cutout_side = 0;
  int cutout_row = 0;
  int cutout_col = 0;
};

AugParams draw_params(const AugCfg& cfg, int size, Rng& rng);

/// Applies `p` to one square single-channel image in place; noise uses `rng`.
void augment_image(float* img, int size, const AugParams& p, Rng& rng);

/// One parameter draw per view, shared by its K slices; channels stay identical.
void augment(multiview::ViewSet& views, const AugCfg& cfg, Rng& rng);
/// One parameter draw per volume, applied to every axial plane.
void augment(Volume& vol, const AugCfg& cfg, Rng& rng);

}  // namespace hybridct::train

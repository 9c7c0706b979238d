// SPDX-License-Identifier: Apache-2.0
#include "hybridct/core/volume.hpp"

namespace hybridct {

std::string to_string(VolumeStage s) {
  switch (s) {
    case VolumeStage::raw: return "raw";
    case VolumeStage::resized: return "resized";
    case VolumeStage::denoised: return "denoised";
    case VolumeStage::sharpened: return "sharpened";
    case VolumeStage::normalized: return "normalized";
  }
  return "unknown";
}

}  // namespace hybridct

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hybridct/preprocess/preprocess.hpp"
#include "hybridct/synth/synthgen.hpp"
#include "hybridct/train/dataset.hpp"

namespace hybridct::testing {

/// Generates `spec`, quantizes every scan to 8-bit slices exactly as written to disk, and runs
/// the preprocessing pipeline, all in memory.
inline train::Dataset synthetic_dataset(const synth::SynthSpec& spec, const preprocess::PreprocCfg& pre) {
  std::vector<train::Sample> samples;
  for (auto& g : synth::generate_in_memory(spec)) {
    preprocess::SliceStack stack;
    stack.slices = synth::to_slices(g.volume);
    stack.source_order.resize(stack.slices.size());
    samples.push_back({g.record, preprocess::preprocess_stack(stack, pre)});
  }
  return train::Dataset(std::move(samples));
}

}  // namespace hybridct::testing

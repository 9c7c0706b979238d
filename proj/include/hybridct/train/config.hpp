// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "hybridct/nn/resnet3d.hpp"
#include "hybridct/nn/vit.hpp"
#include "hybridct/preprocess/preprocess.hpp"
#include "hybridct/synth/synthgen.hpp"
#include "hybridct/train/trainer.hpp"

namespace hybridct::train {

enum class Profile { desk, paper };
Profile parse_profile(const std::string& s);
std::string to_string(Profile p);

/// Fully resolved settings for every command.
struct RunConfig {
  Profile profile = Profile::desk;
  std::uint64_t seed = 0;
  synth::SynthSpec synth;
  preprocess::PreprocCfg preprocess;
  nn::Model3DCfg model3d;
  nn::Encoder25DCfg model25d;
  TrainCfg train3d;
  TrainCfg train25d;
  double epoch_factor_3d = 1.0;
  double epoch_factor_25d = 1.0;
  double ensemble_w = 0.5;

  /// The merged tree this config was parsed from.
  YAML::Node resolved;
};

/// Defaults for a profile as a config tree.
YAML::Node default_tree(Profile profile);

/// Dotted key path -> value overrides, applied last.
using Overrides = std::vector<std::pair<std::string, std::string>>;

/// defaults(profile) <- file <- overrides. The profile itself is taken from the overrides, then
/// the file, then `desk`. Throws ValidationError on unknown keys or invalid values.
RunConfig resolve_config(const std::filesystem::path& file, const Overrides& overrides);

/// Parses a complete tree (as produced by resolve_config).
RunConfig parse_config(const YAML::Node& tree);

/// Writes the resolved tree as YAML.
void write_config_echo(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace hybridct::train

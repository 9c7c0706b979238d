// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hybridct/core/manifest.hpp"
#include "hybridct/core/rng.hpp"
#include "hybridct/core/tensor.hpp"
#include "hybridct/core/volume.hpp"
#include "hybridct/multiview/multiview.hpp"
#include "hybridct/train/augment.hpp"

namespace hybridct::train {

enum class DomainKey { source, gender };
DomainKey parse_domain_key(const std::string& s);
std::string to_string(DomainKey k);

struct Sample {
  ScanRecord record;
  Volume volume;  // normalized, [0, 255]
};

/// Preprocessed scans held in memory.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Sample> samples);

  /// Reads `manifest` and `<volume_dir>/<scan_id>.vol` for every record.
  static Dataset load(const std::filesystem::path& manifest, const std::filesystem::path& volume_dir);

  std::size_t size() const { return samples_.size(); }
  const Sample& at(std::size_t i) const { return samples_.at(i); }
  std::vector<int> indices(Split split) const;
  int n_classes() const;
  int domain_of(std::size_t i, DomainKey key) const;
  std::string group_of(std::size_t i, DomainKey key) const;

 private:
  std::vector<Sample> samples_;
};

/// How a volume becomes one model input: "3d" -> [1, S, S, S] in [0, 1];
/// "25d" -> standardized ViewSet [3, K, 3, S, S].
struct InputSpec {
  std::string kind;
  std::vector<int> sample_shape;
  multiview::ChannelNorm norm;

  static InputSpec for_model(const std::string& kind, const std::vector<int>& sample_shape);
};

/// Writes one sample into `dst` (sample_shape elements). `aug` may be null.
void make_input(const Volume& vol, const InputSpec& spec, const AugCfg* aug, Rng& rng, float* dst);

/// Stacks samples `idx`; each sample's augmentation stream is derive_rng(seed, {keys..., idx[i]}).
Tensor make_batch(const Dataset& data, const std::vector<int>& idx, const InputSpec& spec, const AugCfg* aug,
                  std::uint64_t seed, std::uint64_t stage, std::uint64_t epoch);

}  // namespace hybridct::train

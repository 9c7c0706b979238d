// SPDX-License-Identifier: Apache-2.0
#include "hybridct/train/dataset.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"
#include "hybridct/preprocess/preprocess.hpp"

namespace hybridct::train {

DomainKey parse_domain_key(const std::string& s) {
  if (s == "source") return DomainKey::source;
  if (s == "gender") return DomainKey::gender;
  throw ValidationError("unknown domain key '" + s + "' (expected source or gender)");
}

std::string to_string(DomainKey k) { return k == DomainKey::source ? "source" : "gender"; }

Dataset::Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {}

Dataset Dataset::load(const std::filesystem::path& manifest, const std::filesystem::path& volume_dir) {
  std::vector<Sample> samples;
  for (auto& r : read_manifest_csv(manifest)) {
    const auto path = volume_dir / (r.scan_id + ".vol");
    Volume v = preprocess::read_volume(path);
    samples.push_back({std::move(r), std::move(v)});
  }
  return Dataset(std::move(samples));
}

std::vector<int> Dataset::indices(Split split) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < samples_.size(); ++i)
    if (samples_[i].record.split == split) out.push_back(static_cast<int>(i));
  return out;
}

int Dataset::n_classes() const {
  int c = 0;
  for (const auto& s : samples_) c = std::max(c, s.record.label + 1);
  return c;
}

int Dataset::domain_of(std::size_t i, DomainKey key) const {
  const auto& r = samples_.at(i).record;
  return key == DomainKey::source ? r.source : static_cast<int>(r.gender);
}

std::string Dataset::group_of(std::size_t i, DomainKey key) const {
  const auto& r = samples_.at(i).record;
  return key == DomainKey::source ? std::to_string(r.source) : to_string(r.gender);
}

InputSpec InputSpec::for_model(const std::string& kind, const std::vector<int>& sample_shape) {
  if (kind == "3d") HYBRIDCT_REQUIRE(sample_shape.size() == 4 && sample_shape[0] == 1, "3d input must be [1, S, S, S]");
  else if (kind == "25d") HYBRIDCT_REQUIRE(sample_shape.size() == 5 && sample_shape[0] == 3 && sample_shape[2] == 3, "25d input must be [3, K, 3, S, S]");
  else throw ValidationError("unknown model kind '" + kind + "'");
  return {kind, sample_shape, {}};
}

void make_input(const Volume& vol, const InputSpec& spec, const AugCfg* aug, Rng& rng, float* dst) {
  if (spec.kind == "3d") {
    const int S = spec.sample_shape[1];
    if (vol.depth != S || vol.height != S || vol.width != S)
      throw ValidationError(fmt::format("3d model expects {}^3 volumes, got {}x{}x{}", S, vol.depth, vol.height, vol.width));
    if (aug) {
      Volume v = vol;
      augment(v, *aug, rng);
      std::transform(v.data.begin(), v.data.end(), dst, [](float x) { return x / 255.0f; });
    } else {
      std::transform(vol.data.begin(), vol.data.end(), dst, [](float x) { return x / 255.0f; });
    }
    return;
  }
  const int K = spec.sample_shape[1];
  const int S = spec.sample_shape[3];
  multiview::ViewSet views = multiview::extract_views(vol, {K, S});
  if (aug) augment(views, *aug, rng);
  multiview::standardize(views.data.data(), multiview::kNumViews * K, S, spec.norm);
  std::copy(views.data.values().begin(), views.data.values().end(), dst);
}

Tensor make_batch(const Dataset& data, const std::vector<int>& idx, const InputSpec& spec, const AugCfg* aug,
                  std::uint64_t seed, std::uint64_t stage, std::uint64_t epoch) {
  std::vector<int> shape{static_cast<int>(idx.size())};
  shape.insert(shape.end(), spec.sample_shape.begin(), spec.sample_shape.end());
  Tensor batch(shape);
  const std::size_t per = shape_numel(spec.sample_shape);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Rng rng = derive_rng(seed, {stage, epoch, static_cast<std::uint64_t>(idx[i])});
    make_input(data.at(idx[i]).volume, spec, aug, rng, batch.data() + i * per);
  }
  return batch;
}

}  // namespace hybridct::train

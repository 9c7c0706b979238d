// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hybridct/core/image.hpp"
#include "hybridct/core/manifest.hpp"
#include "hybridct/core/rng.hpp"
#include "hybridct/core/volume.hpp"

namespace hybridct::synth {

/// Acquisition differences of one data source, applied after the class signature.
struct SourceShift {
  double intensity_bias = 0.0;  // grayscale units
  double noise_sigma = 0.0;
  double blur_sigma = 0.0;  // voxels; 0 disables blurring
};

struct SynthSpec {
  int n_scans_per_class_per_source = 5;
  int n_classes = 2;
  int n_sources = 4;
  int volume_side = 64;
  double class_signature_strength = 1.0;
  /// One entry per source; empty selects default_source_shifts(n_sources).
  std::vector<SourceShift> source_shift;
  /// Probability that a scan is female.
  double gender_ratio = 0.5;
  /// Scans per (class, source) cell assigned to the validation split; -1 derives it from val_fraction.
  int val_per_cell = -1;
  double val_fraction = 0.2;
  double duplicate_slice_prob = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<SourceShift> resolved_shifts() const;
  int resolved_val_per_cell() const;
};

/// Moderate per-source bias/noise/blur, cycling for more than four sources.
std::vector<SourceShift> default_source_shifts(int n_sources);

/// Everything about a phantom that is fixed across a dataset.
struct PhantomParams {
  int side = 64;
  int n_classes = 2;
  double signature_strength = 1.0;
  double duplicate_slice_prob = 0.2;
};

/// Class-independent anatomy: body, lungs, spine and a scan-specific tissue texture.
Volume make_base_phantom(const PhantomParams& p, Gender gender, Rng& rng);

/// Base phantom + class lesions, then source blur, bias and noise, clamped to [0, 255]. With
/// probability duplicate_slice_prob one axial slice is repeated (depth becomes side + 1).
Volume make_phantom(const PhantomParams& p, int class_id, const SourceShift& source, Gender gender,
                    Rng& rng);

struct DatasetManifest {
  std::vector<ScanRecord> records;
  std::filesystem::path root_path;
  SynthSpec spec_echo;
};

struct GeneratedScan {
  ScanRecord record;
  Volume volume;
};

/// Scan `index` of the dataset described by `spec` (sources outermost, then classes, then repeats).
GeneratedScan generate_scan(const SynthSpec& spec, int index);

/// All scans, in manifest order, without touching the filesystem.
std::vector<GeneratedScan> generate_in_memory(const SynthSpec& spec);

/// Writes `<out>/<scan_id>/slice_XXXX.png`, `<out>/manifest.csv` and `<out>/synth_spec.json`.
DatasetManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Quantizes a phantom to 8-bit axial slices.
std::vector<GrayImage> to_slices(const Volume& vol);

}  // namespace hybridct::synth

// SPDX-License-Identifier: Apache-2.0
#include "hybridct/synth/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"
#include "hybridct/preprocess/preprocess.hpp"
#include "json.hpp"

namespace hybridct::synth {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  HYBRIDCT_REQUIRE(n_scans_per_class_per_source >= 0, "n_scans_per_class_per_source must be >= 0");
  HYBRIDCT_REQUIRE(n_classes >= 2, "n_classes must be >= 2");
  HYBRIDCT_REQUIRE(n_sources >= 2, "n_sources must be >= 2");
  HYBRIDCT_REQUIRE(volume_side >= 8, "volume_side must be >= 8");
  HYBRIDCT_REQUIRE(std::isfinite(class_signature_strength) && class_signature_strength >= 0.0 &&
                       class_signature_strength <= 1.0,
                   "class_signature_strength must lie in [0, 1]");
  HYBRIDCT_REQUIRE(gender_ratio >= 0.0 && gender_ratio <= 1.0, "gender_ratio must lie in [0, 1]");
  HYBRIDCT_REQUIRE(val_fraction >= 0.0 && val_fraction <= 1.0, "val_fraction must lie in [0, 1]");
  HYBRIDCT_REQUIRE(val_per_cell <= n_scans_per_class_per_source, "val_per_cell exceeds the cell size");
  HYBRIDCT_REQUIRE(duplicate_slice_prob >= 0.0 && duplicate_slice_prob <= 1.0,
                   "duplicate_slice_prob must lie in [0, 1]");
  HYBRIDCT_REQUIRE(source_shift.empty() || static_cast<int>(source_shift.size()) == n_sources,
                   "source_shift needs one entry per source");
  for (const auto& s : source_shift) {
    HYBRIDCT_REQUIRE(std::isfinite(s.intensity_bias), "source intensity_bias must be finite");
    HYBRIDCT_REQUIRE(std::isfinite(s.noise_sigma) && s.noise_sigma >= 0, "noise_sigma must be >= 0");
    HYBRIDCT_REQUIRE(std::isfinite(s.blur_sigma) && s.blur_sigma >= 0, "blur_sigma must be >= 0");
  }
}

std::vector<SourceShift> default_source_shifts(int n_sources) {
  static constexpr std::array<SourceShift, 4> kBase{{
      {0.0, 3.0, 0.0},
      {20.0, 6.0, 0.6},
      {-15.0, 4.0, 0.0},
      {30.0, 9.0, 1.0},
  }};
  std::vector<SourceShift> out;
  for (int i = 0; i < n_sources; ++i) out.push_back(kBase[i % kBase.size()]);
  return out;
}

std::vector<SourceShift> SynthSpec::resolved_shifts() const {
  return source_shift.empty() ? default_source_shifts(n_sources) : source_shift;
}

int SynthSpec::resolved_val_per_cell() const {
  if (val_per_cell >= 0) return val_per_cell;
  return static_cast<int>(std::lround(val_fraction * n_scans_per_class_per_source));
}

namespace {

constexpr double kBackground = 8.0;
constexpr double kTissue = 130.0;
constexpr double kLung = 35.0;
constexpr double kBone = 220.0;

struct Lesion {
  std::array<double, 3> center;  // z, y, x in [-1, 1]
  std::array<double, 3> radii;
  double amplitude;
  double frequency;  // texture cycles across the unit cube
};

// Lesion layouts in lung-relative coordinates; x offsets are scaled with the lungs.
const std::vector<Lesion>& lesion_pattern(int pattern) {
  static const std::vector<std::vector<Lesion>> kPatterns = {
      // multifocal peripheral patches
      {{{-0.35, -0.05, -0.55}, {0.40, 0.26, 0.20}, 90.0, 4.0},
       {{0.35, -0.05, -0.55}, {0.40, 0.26, 0.20}, 90.0, 4.0},
       {{-0.35, -0.05, 0.55}, {0.40, 0.26, 0.20}, 90.0, 4.0},
       {{0.35, -0.05, 0.55}, {0.40, 0.26, 0.20}, 90.0, 4.0}},
      // one large diffuse consolidation in the lower right lung
      {{{0.35, 0.0, 0.40}, {0.30, 0.30, 0.20}, 70.0, 2.0}},
      // compact dense nodules
      {{{-0.45, -0.15, -0.38}, {0.09, 0.09, 0.09}, 150.0, 7.0},
       {{0.0, 0.10, 0.42}, {0.09, 0.09, 0.09}, 150.0, 7.0}},
  };
  return kPatterns[static_cast<std::size_t>(pattern) % kPatterns.size()];
}

double coord(int i, int n) { return (i + 0.5) / n * 2.0 - 1.0; }

double gender_scale(Gender g) { return g == Gender::female ? 0.92 : 1.0; }

bool in_lung(double z, double y, double x, double gs) {
  for (double side : {-1.0, 1.0}) {
    const double dz = z / 0.85;
    const double dy = (y + 0.05) / (0.55 * gs);
    const double dx = (x - side * 0.40 * gs) / (0.30 * gs);
    if (dz * dz + dy * dy + dx * dx <= 1.0) return true;
  }
  return false;
}

}  // namespace

Volume make_base_phantom(const PhantomParams& p, Gender gender, Rng& rng) {
  const int n = p.side;
  const double gs = gender_scale(gender);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Wave {
    double kz, ky, kx, phase;
  };
  std::array<Wave, 3> waves;
  for (auto& wv : waves) {
    wv.kz = (unit(rng) * 2.0 - 1.0) * 3.0;
    wv.ky = (unit(rng) * 2.0 - 1.0) * 3.0;
    wv.kx = (unit(rng) * 2.0 - 1.0) * 3.0;
    wv.phase = unit(rng) * 2.0 * std::numbers::pi;
  }

  Volume vol(n, n, n);
  for (int d = 0; d < n; ++d) {
    const double z = coord(d, n);
    const double taper = 1.0 - 0.08 * z * z;
    for (int h = 0; h < n; ++h) {
      const double y = coord(h, n);
      for (int w = 0; w < n; ++w) {
        const double x = coord(w, n);
        const double by = y / (0.80 * gs * taper);
        const double bx = x / (0.92 * gs * taper);
        double v = kBackground;
        if (by * by + bx * bx <= 1.0) {
          v = kTissue;
          const double sy = (y - 0.55 * gs) / (0.12 * gs);
          const double sx = x / (0.12 * gs);
          if (sy * sy + sx * sx <= 1.0) v = kBone;
          if (in_lung(z, y, x, gs)) v = kLung;
          double tex = 0.0;
          for (const auto& wv : waves)
            tex += std::cos(std::numbers::pi * (wv.kz * z + wv.ky * y + wv.kx * x) + wv.phase);
          v += 5.0 / 3.0 * tex;
        }
        v += (unit(rng) - 0.5) * 6.0;
        vol.at(d, h, w) = static_cast<float>(v);
      }
    }
  }
  return vol;
}

Volume make_phantom(const PhantomParams& p, int class_id, const SourceShift& source, Gender gender,
                    Rng& rng) {
  HYBRIDCT_REQUIRE(class_id >= 0 && class_id < p.n_classes, "class_id out of range");
  Volume vol = make_base_phantom(p, gender, rng);
  const int n = p.side;
  const double gs = gender_scale(gender);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (class_id > 0) {
    for (Lesion les : lesion_pattern(class_id - 1)) {
      for (auto& c : les.center) c += (unit(rng) - 0.5) * 0.10;
      const double rscale = 0.85 + 0.30 * unit(rng);
      for (auto& r : les.radii) r *= rscale;
      const double phase = unit(rng) * 2.0 * std::numbers::pi;
      les.center[2] *= gs;
      const double amp = p.signature_strength * les.amplitude;
      if (amp == 0.0) continue;
      for (int d = 0; d < n; ++d) {
        const double z = coord(d, n);
        for (int h = 0; h < n; ++h) {
          const double y = coord(h, n);
          for (int w = 0; w < n; ++w) {
            const double x = coord(w, n);
            const double ez = (z - les.center[0]) / les.radii[0];
            const double ey = (y - les.center[1]) / les.radii[1];
            const double ex = (x - les.center[2]) / les.radii[2];
            const double r2 = ez * ez + ey * ey + ex * ex;
            if (r2 >= 1.0 || !in_lung(z, y, x, gs)) continue;
            const double edge = std::min(1.0, 4.0 * (1.0 - r2));
            const double texture =
                0.75 + 0.25 * std::cos(2.0 * std::numbers::pi * les.frequency * (x + y + z) + phase);
            vol.at(d, h, w) += static_cast<float>(amp * edge * texture);
          }
        }
      }
    }
  }

  if (source.blur_sigma > 0.0) {
    vol = preprocess::gaussian_denoise(vol, source.blur_sigma);
    vol.stage = VolumeStage::raw;
  }
  if (source.intensity_bias != 0.0 || source.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, source.noise_sigma > 0.0 ? source.noise_sigma : 1.0);
    for (float& v : vol.data) {
      double x = v + source.intensity_bias;
      if (source.noise_sigma > 0.0) x += noise(rng);
      v = static_cast<float>(x);
    }
  }
  for (float& v : vol.data) v = std::clamp(v, 0.0f, 255.0f);

  if (p.duplicate_slice_prob > 0.0 && unit(rng) < p.duplicate_slice_prob) {
    const int at = std::uniform_int_distribution<int>(0, vol.depth - 1)(rng);
    const std::size_t plane = static_cast<std::size_t>(vol.height) * vol.width;
    std::vector<float> copy(vol.data.begin() + at * plane, vol.data.begin() + (at + 1) * plane);
    vol.data.insert(vol.data.begin() + (at + 1) * plane, copy.begin(), copy.end());
    vol.depth += 1;
  }
  return vol;
}

std::vector<GrayImage> to_slices(const Volume& vol) {
  std::vector<GrayImage> out;
  const std::size_t plane = static_cast<std::size_t>(vol.height) * vol.width;
  for (int d = 0; d < vol.depth; ++d) {
    GrayImage img{vol.height, vol.width, std::vector<std::uint8_t>(plane)};
    for (std::size_t i = 0; i < plane; ++i)
      img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(vol.data[d * plane + i]), 0L, 255L));
    out.push_back(std::move(img));
  }
  return out;
}

GeneratedScan generate_scan(const SynthSpec& spec, int index) {
  const int per_cell = spec.n_scans_per_class_per_source;
  const int cell = index / per_cell;
  const int repeat = index % per_cell;
  const int source = cell / spec.n_classes;
  const int label = cell % spec.n_classes;
  HYBRIDCT_REQUIRE(source < spec.n_sources, "scan index out of range");

  Rng rng = derive_rng(spec.seed, {static_cast<std::uint64_t>(index)});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GeneratedScan out;
  out.record.scan_id = fmt::format("scan_{:05d}", index);
  out.record.label = label;
  out.record.source = source;
  out.record.gender = unit(rng) < spec.gender_ratio ? Gender::female : Gender::male;
  out.record.split = repeat < per_cell - spec.resolved_val_per_cell() ? Split::train : Split::val;

  const PhantomParams params{spec.volume_side, spec.n_classes, spec.class_signature_strength,
                             spec.duplicate_slice_prob};
  const auto shifts = spec.resolved_shifts();
  out.volume = make_phantom(params, label, shifts[source], out.record.gender, rng);
  return out;
}

std::vector<GeneratedScan> generate_in_memory(const SynthSpec& spec) {
  spec.validate();
  const int total = spec.n_scans_per_class_per_source * spec.n_classes * spec.n_sources;
  std::vector<GeneratedScan> out;
  out.reserve(total);
  for (int i = 0; i < total; ++i) out.push_back(generate_scan(spec, i));
  return out;
}

namespace {

nlohmann::json spec_to_json(const SynthSpec& s) {
  nlohmann::json shifts = nlohmann::json::array();
  for (const auto& sh : s.resolved_shifts())
    shifts.push_back({{"intensity_bias", sh.intensity_bias},
                      {"noise_sigma", sh.noise_sigma},
                      {"blur_sigma", sh.blur_sigma}});
  return {{"n_scans_per_class_per_source", s.n_scans_per_class_per_source},
          {"n_classes", s.n_classes},
          {"n_sources", s.n_sources},
          {"volume_side", s.volume_side},
          {"class_signature_strength", s.class_signature_strength},
          {"source_shift", shifts},
          {"gender_ratio", s.gender_ratio},
          {"val_per_cell", s.resolved_val_per_cell()},
          {"duplicate_slice_prob", s.duplicate_slice_prob},
          {"seed", s.seed}};
}

}  // namespace

DatasetManifest generate_dataset(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir))
    throw RuntimeFailure("cannot create output directory " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.root_path = out_dir;
  manifest.spec_echo = spec;
  const int total = spec.n_scans_per_class_per_source * spec.n_classes * spec.n_sources;
  for (int i = 0; i < total; ++i) {
    GeneratedScan scan = generate_scan(spec, i);
    const fs::path dir = out_dir / scan.record.scan_id;
    fs::create_directories(dir, ec);
    if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
    const auto slices = to_slices(scan.volume);
    for (std::size_t d = 0; d < slices.size(); ++d)
      write_png_gray(dir / fmt::format("slice_{:04d}.png", d), slices[d]);
    manifest.records.push_back(scan.record);
  }
  write_manifest_csv(out_dir / "manifest.csv", manifest.records);
  std::ofstream js(out_dir / "synth_spec.json", std::ios::binary);
  if (!js) throw RuntimeFailure("cannot write " + (out_dir / "synth_spec.json").string());
  js << spec_to_json(spec).dump(2) << '\n';
  return manifest;
}

}  // namespace hybridct::synth

// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "hybridct/core/error.hpp"
#include "hybridct/synth/synthgen.hpp"

using namespace hybridct;
using namespace hybridct::synth;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hybridct_synth_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    out[std::filesystem::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

// Mean intensity of every plane along each axis, concatenated, minus the scan's overall mean.
std::vector<double> profile(const Volume& v) {
  const int S = v.height;
  std::vector<double> f(3 * S, 0.0);
  for (int d = 0; d < v.depth; ++d)
    for (int h = 0; h < v.height; ++h)
      for (int w = 0; w < v.width; ++w) {
        const double x = v.at(d, h, w);
        f[std::min(d, S - 1)] += x;
        f[S + h] += x;
        f[2 * S + w] += x;
      }
  double mean = 0.0;
  for (double& x : f) mean += x /= static_cast<double>(S) * S;
  mean /= f.size();
  for (double& x : f) x -= mean;
  return f;
}

// Nearest class centroid fitted on even-indexed scans, scored on odd-indexed ones; distances
// are scaled by the pooled within-class variance of each feature.
double centroid_accuracy(const std::vector<GeneratedScan>& scans, int n_classes) {
  std::vector<std::vector<double>> feats;
  for (const auto& s : scans) feats.push_back(profile(s.volume));
  const std::size_t F = feats.front().size();
  std::vector<std::vector<double>> c(n_classes, std::vector<double>(F, 0.0));
  std::vector<int> n(n_classes, 0);
  for (std::size_t i = 0; i < scans.size(); i += 2) {
    const int y = scans[i].record.label;
    for (std::size_t j = 0; j < F; ++j) c[y][j] += feats[i][j];
    ++n[y];
  }
  for (int k = 0; k < n_classes; ++k)
    for (double& x : c[k]) x /= std::max(n[k], 1);
  std::vector<double> var(F, 1e-9);
  int n_fit = 0;
  for (std::size_t i = 0; i < scans.size(); i += 2, ++n_fit)
    for (std::size_t j = 0; j < F; ++j) {
      const double e = feats[i][j] - c[scans[i].record.label][j];
      var[j] += e * e;
    }
  for (double& v : var) v /= n_fit;
  int hit = 0, total = 0;
  for (std::size_t i = 1; i < scans.size(); i += 2) {
    int best = 0;
    double bd = 1e300;
    for (int k = 0; k < n_classes; ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < F; ++j) d += (feats[i][j] - c[k][j]) * (feats[i][j] - c[k][j]) / var[j];
      if (d < bd) bd = d, best = k;
    }
    hit += best == scans[i].record.label;
    ++total;
  }
  return static_cast<double>(hit) / total;
}

}  // namespace

TEST_CASE("zero scans gives an empty manifest and no scan directories") {
  SynthSpec s;
  s.n_scans_per_class_per_source = 0;
  const auto dir = scratch("empty");
  const auto m = generate_dataset(s, dir);
  CHECK(m.records.empty());
  int dirs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) dirs += e.is_directory();
  CHECK(dirs == 0);
  CHECK(read_manifest_csv(dir / "manifest.csv").empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("generation is byte-identical across runs and balanced per cell") {
  SynthSpec s;
  s.n_scans_per_class_per_source = 5;
  s.n_classes = 2;
  s.n_sources = 4;
  s.volume_side = 32;
  s.seed = 7;
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto ma = generate_dataset(s, a);
  generate_dataset(s, b);
  CHECK(ma.records.size() == 40);
  CHECK(read_tree(a) == read_tree(b));

  std::map<std::pair<int, int>, int> cells;
  std::set<std::string> ids;
  for (const auto& r : ma.records) {
    ++cells[{r.label, r.source}];
    ids.insert(r.scan_id);
    CHECK(std::filesystem::is_directory(a / r.scan_id));
    CHECK(!std::filesystem::is_empty(a / r.scan_id));
  }
  CHECK(ids.size() == 40);
  CHECK(cells.size() == 8);
  for (const auto& [k, n] : cells) CHECK(n == 5);
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("validation split takes the same count from every cell") {
  SynthSpec s;
  s.n_scans_per_class_per_source = 26;
  s.val_fraction = 0.23;
  s.volume_side = 8;
  std::map<std::pair<int, int>, int> val;
  int n_val = 0, n_train = 0;
  for (int i = 0; i < 2 * 4 * 26; ++i) {
    const auto r = generate_scan(s, i).record;
    if (r.split == Split::val) {
      ++val[{r.label, r.source}];
      ++n_val;
    } else {
      ++n_train;
    }
  }
  CHECK(n_train == 160);
  CHECK(n_val == 48);
  for (const auto& [k, n] : val) CHECK(n == 6);
}

TEST_CASE("no signature and no source effect reproduces the base phantom") {
  PhantomParams p;
  p.side = 32;
  p.signature_strength = 0.0;
  p.duplicate_slice_prob = 0.0;
  for (int cls : {0, 1})
    for (Gender g : {Gender::female, Gender::male}) {
      Rng r1(42), r2(42);
      const Volume base = make_base_phantom(p, g, r1);
      const Volume full = make_phantom(p, cls, SourceShift{}, g, r2);
      CHECK(full.data == base.data);
    }
}

TEST_CASE("same rng state gives identical phantoms") {
  PhantomParams p;
  p.side = 24;
  Rng r1(9), r2(9);
  SourceShift s{10.0, 3.0, 0.5};
  CHECK(make_phantom(p, 1, s, Gender::male, r1).data == make_phantom(p, 1, s, Gender::male, r2).data);
}

TEST_CASE("source bias of +30 raises the unclamped mean by 30") {
  PhantomParams p;
  p.side = 32;
  p.duplicate_slice_prob = 0.0;
  Rng r1(5), r2(5);
  const Volume v0 = make_phantom(p, 1, SourceShift{0.0, 0.0, 0.0}, Gender::female, r1);
  const Volume v30 = make_phantom(p, 1, SourceShift{30.0, 0.0, 0.0}, Gender::female, r2);
  double diff = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < v0.voxels(); ++i) {
    if (v0.data[i] <= 0.0f || v30.data[i] >= 255.0f) continue;
    diff += v30.data[i] - v0.data[i];
    ++n;
  }
  REQUIRE(n > 1000);
  CHECK(std::abs(diff / n - 30.0) <= 1.0);
}

TEST_CASE("class signature is recoverable by a centroid classifier") {
  SynthSpec s;
  s.n_scans_per_class_per_source = 20;
  s.volume_side = 64;
  s.class_signature_strength = 1.0;
  s.seed = 3;
  CHECK(centroid_accuracy(generate_in_memory(s), 2) >= 0.95);
}

TEST_CASE("zero signature strength is near chance") {
  SynthSpec s;
  s.n_scans_per_class_per_source = 25;
  s.volume_side = 64;
  s.class_signature_strength = 0.0;
  s.seed = 4;
  const auto scans = generate_in_memory(s);
  REQUIRE(scans.size() == 200);
  CHECK(std::abs(centroid_accuracy(scans, 2) - 0.5) <= 0.15);
}

TEST_CASE("gender frequency within the binomial 99% interval") {
  for (double ratio : {0.5, 0.3}) {
    SynthSpec s;
    s.n_scans_per_class_per_source = 50;
    s.volume_side = 8;
    s.gender_ratio = ratio;
    s.seed = 12;
    const int n = 2 * 4 * 50;
    int female = 0;
    for (int i = 0; i < n; ++i) female += generate_scan(s, i).record.gender == Gender::female;
    const double half_width = 2.576 * std::sqrt(n * ratio * (1 - ratio));
    CHECK(std::abs(female - n * ratio) <= half_width);
  }
}

TEST_CASE("duplicated slice appears as a repeated consecutive plane") {
  PhantomParams p;
  p.side = 16;
  p.duplicate_slice_prob = 1.0;
  Rng rng(1);
  const Volume v = make_phantom(p, 0, SourceShift{}, Gender::male, rng);
  REQUIRE(v.depth == 17);
  const auto slices = to_slices(v);
  bool repeated = false;
  for (std::size_t i = 1; i < slices.size(); ++i) repeated |= slices[i] == slices[i - 1];
  CHECK(repeated);
}

TEST_CASE("spec validation") {
  SynthSpec s;
  s.n_sources = 1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = SynthSpec{};
  s.class_signature_strength = -0.5;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = SynthSpec{};
  s.source_shift = {SourceShift{0.0, std::nan(""), 0.0}, {}, {}, {}};
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("unwritable output names the path") {
  SynthSpec s;
  s.n_scans_per_class_per_source = 1;
  s.volume_side = 8;
  const auto file = std::filesystem::temp_directory_path() / "hybridct_synth_blocker";
  std::ofstream(file) << "x";
  try {
    generate_dataset(s, file / "sub");
    FAIL("expected failure");
  } catch (const RuntimeFailure& e) {
    CHECK(std::string(e.what()).find("hybridct_synth_blocker") != std::string::npos);
  }
  std::filesystem::remove(file);
}

// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hybridct/cli/cli.hpp"
#include "hybridct/core/manifest.hpp"
#include "hybridct/eval/eval.hpp"
#include "hybridct/preprocess/preprocess.hpp"
#include "json.hpp"

using namespace hybridct;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path root() {
  static const fs::path r = [] {
    auto p = fs::temp_directory_path() / "hybridct_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    setenv("HYBRIDCT_RUN_ROOT", (p / "runs").c_str(), 1);
    return p;
  }();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

long count_lines(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  long n = 0;
  while (std::getline(is, line)) ++n;
  return n;
}

// Synthesized and preprocessed once; 2 sources x 2 classes x 4 scans at 32^3.
const fs::path& prepared() {
  static const fs::path dir = [] {
    const auto d = root() / "data";
    REQUIRE(run({"synth", "--out", d.string(), "--sources", "2", "--classes", "2", "--per-cell", "4", "--seed", "3"}).code ==
            0);
    const auto p = root() / "prep";
    REQUIRE(run({"preprocess", "--data", d.string(), "--out", p.string(), "--target-side", "32"}).code == 0);
    return p;
  }();
  return dir;
}

const std::vector<std::string> kTiny3d{"--train3d-epoch-factor", "0.04", "--batch-size", "4"};
const std::vector<std::string> kTiny25d{"--train25d-epoch-factor", "0.05", "--model25d-depth", "1",
                                        "--model25d-slice-size", "32", "--model25d-embedding-dim", "16",
                                        "--model25d-n-heads", "2", "--model25d-k-slices", "2"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("synth writes one manifest row per scan") {
  const auto d = root() / "synth40";
  const auto r = run({"synth", "--out", d.string(), "--sources", "4", "--classes", "2", "--per-cell", "5", "--side", "16",
                      "--seed", "7"});
  REQUIRE(r.code == 0);
  CHECK(count_lines(d / "manifest.csv") == 41);
  CHECK(read_manifest_csv(d / "manifest.csv").size() == 40);
  CHECK(fs::exists(d / "config.yaml"));
}

TEST_CASE("synth with zero scans per cell writes an empty manifest") {
  const auto d = root() / "synth0";
  const auto r = run({"synth", "--out", d.string(), "--per-cell", "0"});
  CHECK(r.code == 0);
  CHECK(read_manifest_csv(d / "manifest.csv").empty());
}

TEST_CASE("unwritable output path fails and names the path") {
  const auto blocker = root() / "blocker";
  std::ofstream(blocker) << "x";
  const auto target = blocker / "inside";
  const auto r = run({"synth", "--out", target.string(), "--per-cell", "1"});
  CHECK(r.code != 0);
  CHECK(r.err.find(target.string()) != std::string::npos);
}

TEST_CASE("preprocess caches by content hash and writes cubic volumes") {
  const auto& p = prepared();
  const auto records = read_manifest_csv(p / "manifest.csv");
  REQUIRE(records.size() == 16);
  for (const auto& rec : records) {
    const auto bytes = slurp(p / (rec.scan_id + ".vol"));
    REQUIRE(bytes.size() >= 16);
    CHECK(bytes.substr(0, 4) == "VOL1");
    const auto v = preprocess::read_volume(p / (rec.scan_id + ".vol"));
    CHECK(v.depth == 32);
    CHECK(v.height == 32);
    CHECK(v.width == 32);
  }
  const auto before = fs::last_write_time(p / (records[0].scan_id + ".vol"));
  const auto again = run({"preprocess", "--data", (root() / "data").string(), "--out", p.string(), "--target-side", "32"});
  CHECK(again.code == 0);
  CHECK(again.out.find("0 processed, 16 up to date") != std::string::npos);
  CHECK(fs::last_write_time(p / (records[0].scan_id + ".vol")) == before);
}

TEST_CASE("corrupt slice file fails naming the scan and stage") {
  const auto d = root() / "corrupt";
  REQUIRE(run({"synth", "--out", d.string(), "--per-cell", "1", "--side", "16"}).code == 0);
  const auto records = read_manifest_csv(d / "manifest.csv");
  const auto victim = records.back().scan_id;
  std::ofstream(d / victim / "slice_0003.png", std::ios::binary | std::ios::trunc) << "not a png";
  const auto r = run({"preprocess", "--data", d.string(), "--out", (root() / "corrupt_out").string()});
  CHECK(r.code == cli::kExitRuntime);
  CHECK(r.err.find(victim) != std::string::npos);
  CHECK(r.err.find("load") != std::string::npos);
}

TEST_CASE("invalid stage plan is rejected before any compute") {
  const auto cfg = root() / "warm.yaml";
  std::ofstream(cfg) << "train3d:\n  stages:\n"
                        "    - {name: a, epochs: 1, base_lr: 0.0001, schedule: cosine, warmup_frac: 0.5,"
                        " weight_decay: 0, losses: vrex, trainability_stage: 3}\n";
  const auto r = run({"train3d", "--data", prepared().string(), "--run-dir", "warm", "--config", cfg.string()});
  CHECK(r.code == cli::kExitValidation);
  CHECK(!fs::exists(root() / "runs" / "warm" / "log.jsonl"));
  CHECK(!fs::exists(root() / "runs" / "warm" / "last.ckpt"));
}

TEST_CASE("usage errors exit with the validation code") {
  CHECK(run({"train3d", "--data", prepared().string(), "--no-such-flag"}).code == cli::kExitValidation);
  CHECK(run({"synth", "--out", (root() / "x").string(), "--set", "synth.nope=1"}).code == cli::kExitValidation);
  CHECK(run({}).code == cli::kExitValidation);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("train, predict, ensemble, evaluate and report end to end") {
  const auto& p = prepared();
  const auto w = root() / "e2e";
  fs::create_directories(w);
  REQUIRE(run(cat({"train3d", "--data", p.string(), "--run-dir", "e2e3"}, kTiny3d)).code == 0);
  REQUIRE(run(cat({"train25d", "--data", p.string(), "--run-dir", "e2e25"}, kTiny25d)).code == 0);
  for (const char* r : {"e2e3", "e2e25"})
    for (const char* f : {"config.yaml", "log.jsonl", "best.ckpt", "last.ckpt", "summary.json"})
      CHECK(fs::exists(root() / "runs" / r / f));

  const auto l3 = (w / "l3.csv").string(), l25 = (w / "l25.csv").string(), le = (w / "le.csv").string();
  REQUIRE(run({"predict", "--checkpoint", (root() / "runs/e2e3/best.ckpt").string(), "--data", p.string(), "--split", "all", "--out", l3}).code ==
          0);
  REQUIRE(run({"predict", "--checkpoint", (root() / "runs/e2e25/best.ckpt").string(), "--data", p.string(), "--split", "all", "--out", l25})
              .code == 0);
  REQUIRE(run({"ensemble", l25, l3, "--w", "0.3", "--out", le}).code == 0);
  CHECK(fs::exists(le + ".config.yaml"));

  const auto a = eval::read_logits_csv(l25), b = eval::read_logits_csv(l3), e = eval::read_logits_csv(le);
  REQUIRE(e.size() == a.size());
  for (const auto& id : e.ids())
    for (std::size_t c = 0; c < 2; ++c)
      CHECK(e.scores(id)[c] == doctest::Approx(0.3 * a.scores(id)[c] + 0.7 * b.scores(id)[c]).epsilon(1e-12));

  REQUIRE(run({"evaluate", "--logits", le, "--data", p.string(), "--group-by", "source", "--out", (w / "ms.json").string(),
               "--table", (w / "ms.md").string()})
              .code == 0);
  const auto src = slurp(w / "ms.md");
  CHECK(src.rfind("| Source | Source 0 | Source 1 |\n|---|:---:|:---:|\n| F1-score |", 0) == 0);
  const auto m = nlohmann::json::parse(slurp(w / "ms.json"));
  CHECK(m["n_samples"].get<int>() == static_cast<int>(e.size()));

  REQUIRE(run({"evaluate", "--logits", le, "--data", p.string(), "--group-by", "gender", "--table", (w / "mg.md").string()})
              .code == 0);
  CHECK(slurp(w / "mg.md").rfind("| Gender | Female | Male | Gap |\n", 0) == 0);

  const auto rep = run({"report", (w / "ms.json").string(), "--layout", "task1_per_source", "--out", (w / "r.md").string(),
                        "--loss-log", (root() / "runs/e2e3/log.jsonl").string(), "--loss-plot", (w / "loss.svg").string()});
  CHECK(rep.code == 0);
  CHECK(slurp(w / "r.md") == src);
  CHECK(slurp(w / "loss.svg").rfind("<svg", 0) == 0);

  std::ofstream(w / "empty.csv") << "scan_id,label,source,gender,split\n";
  const auto missing = run({"evaluate", "--logits", le, "--manifest", (w / "empty.csv").string()});
  CHECK(missing.code == cli::kExitValidation);
}

TEST_CASE("identical config and seed reproduce primary outputs") {
  const auto a = root() / "det_a", b = root() / "det_b";
  for (const auto& d : {a, b})
    REQUIRE(run({"synth", "--out", d.string(), "--per-cell", "2", "--side", "16", "--seed", "9"}).code == 0);
  CHECK(slurp(a / "manifest.csv") == slurp(b / "manifest.csv"));
  for (const auto& rec : read_manifest_csv(a / "manifest.csv"))
    for (const auto& f : fs::directory_iterator(a / rec.scan_id))
      CHECK(slurp(f.path()) == slurp(b / rec.scan_id / f.path().filename()));

  const auto& p = prepared();
  std::vector<std::string> logits;
  for (const char* r : {"det1", "det2"}) {
    REQUIRE(run(cat({"train3d", "--data", p.string(), "--run-dir", r}, kTiny3d)).code == 0);
    const auto out = (root() / (std::string(r) + ".csv")).string();
    REQUIRE(run({"predict", "--checkpoint", (root() / "runs" / r / "best.ckpt").string(), "--data", p.string(), "--split",
                 "all", "--out", out})
                .code == 0);
    logits.push_back(slurp(out));
  }
  CHECK(logits[0] == logits[1]);
}

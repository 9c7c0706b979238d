// SPDX-License-Identifier: Apache-2.0
#include "hybridct/cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hybridct/core/error.hpp"
#include "hybridct/core/hash.hpp"
#include "hybridct/core/manifest.hpp"
#include "hybridct/eval/eval.hpp"
#include "hybridct/eval/report.hpp"
#include "hybridct/nn/checkpoint.hpp"
#include "hybridct/preprocess/preprocess.hpp"
#include "hybridct/synth/synthgen.hpp"
#include "hybridct/train/config.hpp"
#include "hybridct/train/trainer.hpp"
#include "json.hpp"

namespace hybridct::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path run_root() {
  const char* env = std::getenv("HYBRIDCT_RUN_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

namespace {

std::string kebab(std::string s) {
  std::replace(s.begin(), s.end(), '.', '-');
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

void scalar_keys(const YAML::Node& node, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it->first.as<std::string>() : prefix + "." + it->first.as<std::string>();
    if (it->second.IsMap())
      scalar_keys(it->second, key, out);
    else if (it->second.IsScalar())
      out.push_back(key);
  }
}

// Every scalar config key becomes a kebab-case flag (`train3d.batch_size` -> `--train3d-batch-size`);
// `--set key=value` reaches anything else. Flags are applied in declaration order, then --set.
class ConfigFlags {
 public:
  void attach(CLI::App* app, const std::vector<std::pair<std::string, std::string>>& aliases) {
    app->add_option("--config", file_, "YAML config file (defaults < file < flags)");
    app->add_option("--set", sets_, "Override a config key: section.key=value (repeatable)");
    std::vector<std::string> keys;
    scalar_keys(train::default_tree(train::Profile::desk), "", keys);
    for (const auto& k : keys) add(app, "--" + kebab(k), k, "config key " + k);
    for (const auto& [flag, key] : aliases) add(app, flag, key, "same as --" + kebab(key));
  }

  train::RunConfig resolve() const {
    train::Overrides ov;
    for (const auto& [opt, key] : mirrored_)
      if (opt->count() > 0) ov.push_back({key, opt->as<std::string>()});
    for (const auto& s : sets_) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + s + "'");
      ov.push_back({s.substr(0, eq), s.substr(eq + 1)});
    }
    return train::resolve_config(file_, ov);
  }

 private:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    mirrored_.push_back({app->add_option(flag, values_[flag], help), key});
  }

  std::string file_;
  std::vector<std::string> sets_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<CLI::Option*, std::string>> mirrored_;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("cannot write " + path.string());
  os << text;
  if (!os) throw RuntimeFailure("failed writing " + path.string());
}

// Config echo beside a single output file.
void echo_beside(const fs::path& output, const train::RunConfig& cfg) {
  train::write_config_echo(fs::path(output.string() + ".config.yaml"), cfg);
}

fs::path resolve_run_dir(const std::string& dir) {
  const fs::path p(dir);
  return p.is_absolute() ? p : run_root() / p;
}

std::vector<ScanRecord> manifest_of(const fs::path& data_dir) {
  const fs::path m = data_dir / "manifest.csv";
  if (!fs::exists(m)) throw ValidationError("manifest not found: " + m.string());
  return read_manifest_csv(m);
}

// ------------------------------------------------------------------------------------ synth

struct SynthArgs {
  ConfigFlags flags;
  std::string out;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto cfg = a.flags.resolve();
  const auto m = synth::generate_dataset(cfg.synth, a.out);
  train::write_config_echo(fs::path(a.out) / "config.yaml", cfg);
  out << fmt::format("synth: {} scans written to {}\n", m.records.size(), a.out);
}

// ------------------------------------------------------------------------------- preprocess

struct PreprocessArgs {
  ConfigFlags flags;
  std::string data;
  std::string out;
};

std::string content_hash(const fs::path& stack_dir, const preprocess::PreprocCfg& p) {
  Sha256 h;
  h.update(fmt::format("{:.17g} {:.17g} {:.17g} {:.17g}\n", static_cast<double>(p.target_side), p.denoise_sigma,
                       p.sharpen_amount, p.sharpen_sigma));
  std::vector<fs::path> files;
  if (fs::is_directory(stack_dir))
    for (const auto& e : fs::directory_iterator(stack_dir))
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    h.update(f.filename().string());
    h.update_file(f);
  }
  return h.hex_digest();
}

template <class F>
auto in_stage(const std::string& scan, const char* stage, F&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("scan {}: {} stage failed: {}", scan, stage, e.what()));
  } catch (const std::exception& e) {
    throw RuntimeFailure(fmt::format("scan {}: {} stage failed: {}", scan, stage, e.what()));
  }
}

void cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  const auto cfg = a.flags.resolve();
  const fs::path data(a.data), dst(a.out);
  const auto records = manifest_of(data);
  std::error_code ec;
  fs::create_directories(dst, ec);
  if (ec || !fs::is_directory(dst)) throw RuntimeFailure("cannot create output directory " + dst.string());

  const fs::path cache_path = dst / "cache.json";
  json cache = json::object();
  if (fs::exists(cache_path)) {
    std::ifstream is(cache_path);
    cache = json::parse(is, nullptr, false);
    if (cache.is_discarded() || !cache.is_object()) cache = json::object();
  }
  int done = 0, skipped = 0;
  for (const auto& r : records) {
    const fs::path stack_dir = data / r.scan_id;
    const fs::path vol_path = dst / (r.scan_id + ".vol");
    const std::string digest = content_hash(stack_dir, cfg.preprocess);
    if (cache.value(r.scan_id, std::string()) == digest && fs::exists(vol_path)) {
      ++skipped;
      continue;
    }
    const auto stack = in_stage(r.scan_id, "load", [&] { return preprocess::load_slice_stack(stack_dir); });
    const auto vol = in_stage(r.scan_id, "preprocess", [&] { return preprocess::preprocess_stack(stack, cfg.preprocess); });
    in_stage(r.scan_id, "write", [&] {
      preprocess::write_volume(vol_path, vol);
      return 0;
    });
    cache[r.scan_id] = digest;
    ++done;
  }
  write_manifest_csv(dst / "manifest.csv", records);
  write_text(cache_path, cache.dump(2) + "\n");
  train::write_config_echo(dst / "config.yaml", cfg);
  out << fmt::format("preprocess: {} processed, {} up to date, side {}\n", done, skipped, cfg.preprocess.target_side);
}

// ------------------------------------------------------------------------------------ train

struct TrainArgs {
  ConfigFlags flags;
  std::string branch;  // "3d" or "25d"
  std::string data;
  std::string run_dir;
  bool resume = false;
  int stop_after = 0;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = a.flags.resolve();
  const bool is3d = a.branch == "3d";
  train::TrainCfg tc = is3d ? cfg.train3d : cfg.train25d;
  const fs::path run = resolve_run_dir(a.run_dir.empty() ? "train" + a.branch : a.run_dir);
  tc.run_dir = run;
  tc.resume = a.resume;
  tc.stop_after_epochs = a.stop_after;

  const fs::path data(a.data);
  const auto dataset = train::Dataset::load(data / "manifest.csv", data);
  HYBRIDCT_REQUIRE(dataset.size() > 0, "no scans in " + data.string());
  HYBRIDCT_REQUIRE(dataset.n_classes() <= cfg.synth.n_classes,
                   fmt::format("data has labels up to {} but synth.n_classes is {}", dataset.n_classes() - 1,
                               cfg.synth.n_classes));
  const Volume& v0 = dataset.at(0).volume;
  const int side = cfg.preprocess.target_side;
  HYBRIDCT_REQUIRE(v0.depth == side && v0.height == side && v0.width == side,
                   fmt::format("volumes in {} are {}x{}x{} but preprocess.target_side is {}", data.string(), v0.depth,
                               v0.height, v0.width, side));

  std::unique_ptr<nn::ClassifierBranch> model;
  if (is3d)
    model = std::make_unique<nn::ResNet3d>(cfg.model3d, cfg.seed);
  else
    model = std::make_unique<nn::MultiViewModel>(cfg.model25d, cfg.seed);
  fs::create_directories(run);
  train::write_config_echo(run / "config.yaml", cfg);
  const auto st = train::train_branch(*model, dataset, tc);

  json summary = st.to_json();
  summary["branch"] = a.branch;
  write_text(run / "summary.json", summary.dump(2) + "\n");
  out << fmt::format("train{}: {} epochs logged, best val macro F1 {:.4f}, checkpoint {}\n", a.branch,
                     st.history.size(), st.best_val_metric, st.best_checkpoint.string());
}

// ---------------------------------------------------------------------------------- predict

struct PredictArgs {
  ConfigFlags flags;
  std::string checkpoint;
  std::string data;
  std::string split = "val";
  std::string out;
  std::string predictions;
  std::string tag;
};

void cmd_predict(const PredictArgs& a, std::ostream& out) {
  const auto cfg = a.flags.resolve();
  auto loaded = nn::load_model(a.checkpoint);
  const fs::path data(a.data);
  const auto dataset = train::Dataset::load(data / "manifest.csv", data);
  std::vector<int> idx;
  if (a.split == "all") {
    for (std::size_t i = 0; i < dataset.size(); ++i) idx.push_back(static_cast<int>(i));
  } else {
    idx = dataset.indices(parse_split(a.split));
  }
  const bool is3d = loaded.model->kind() == "3d";
  const int batch = is3d ? cfg.train3d.batch_size : cfg.train25d.batch_size;
  const Tensor logits = train::predict_logits(*loaded.model, dataset, idx, batch);
  const int C = loaded.model->n_classes();
  eval::LogitTable table(eval::default_class_names(C), a.tag.empty() ? loaded.model->kind() : a.tag);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const float* row = logits.data() + i * C;
    table.add(dataset.at(idx[i]).record.scan_id, std::vector<double>(row, row + C));
  }
  eval::write_logits_csv(a.out, table);
  if (!a.predictions.empty()) eval::write_predictions_csv(a.predictions, eval::predict_labels(table));
  echo_beside(a.out, cfg);
  out << fmt::format("predict: {} scans ({}) -> {}\n", table.size(), a.split, a.out);
}

// --------------------------------------------------------------------------------- ensemble

struct EnsembleArgs {
  ConfigFlags flags;
  std::vector<std::string> inputs;
  std::string space = "logits";
  std::string out;
  std::string predictions;
};

void cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
  const auto cfg = a.flags.resolve();
  HYBRIDCT_REQUIRE(a.inputs.size() == 2, "ensemble takes exactly two logit tables");
  eval::FusionSpace space;
  if (a.space == "logits")
    space = eval::FusionSpace::logits;
  else if (a.space == "probabilities")
    space = eval::FusionSpace::probabilities;
  else
    throw ValidationError("--space must be logits or probabilities, got '" + a.space + "'");
  const auto ta = eval::read_logits_csv(a.inputs[0]);
  const auto tb = eval::read_logits_csv(a.inputs[1]);
  auto mixed = eval::ensemble(ta, tb, cfg.ensemble_w, space);
  const double w = cfg.ensemble_w;
  mixed.set_model_tag(fmt::format("ensemble({:g}*{}+{:g}*{})", w, ta.model_tag(), 1.0 - w, tb.model_tag()));
  eval::write_logits_csv(a.out, mixed);
  if (!a.predictions.empty()) eval::write_predictions_csv(a.predictions, eval::predict_labels(mixed));
  echo_beside(a.out, cfg);
  out << fmt::format("ensemble: w={:g} weights the first table ({}, tag '{}'); 1-w weights {} (tag '{}'); {} scans -> {}\n",
                     w, a.inputs[0], ta.model_tag(), a.inputs[1], tb.model_tag(), mixed.size(), a.out);
}

// --------------------------------------------------------------------------------- evaluate

struct EvaluateArgs {
  ConfigFlags flags;
  std::string logits;
  std::string data;
  std::string manifest;
  std::string group_by = "source";
  std::string out;
  std::string table;
  std::string tag;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto cfg = a.flags.resolve();
  HYBRIDCT_REQUIRE(a.group_by == "source" || a.group_by == "gender" || a.group_by == "none",
                   "--group-by must be source, gender or none");
  HYBRIDCT_REQUIRE(!a.data.empty() || !a.manifest.empty(), "evaluate needs --data or --manifest");
  const auto records = a.manifest.empty() ? manifest_of(a.data) : read_manifest_csv(a.manifest);
  std::map<std::string, ScanRecord> by_id;
  for (const auto& r : records) by_id[r.scan_id] = r;

  const auto table = eval::read_logits_csv(a.logits);
  std::vector<int> preds, labels;
  std::vector<std::string> groups;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto it = by_id.find(table.ids()[i]);
    if (it == by_id.end()) {
      missing.push_back(table.ids()[i]);
      continue;
    }
    preds.push_back(eval::argmax(table.scores_at(i)));
    labels.push_back(it->second.label);
    groups.push_back(a.group_by == "source"   ? std::to_string(it->second.source)
                     : a.group_by == "gender" ? to_string(it->second.gender)
                                              : std::string("all"));
  }
  if (!missing.empty())
    throw ValidationError(fmt::format("{} scan(s) in {} are not in the manifest, first: {}", missing.size(), a.logits,
                                      missing.front()));
  const std::string group_by = a.group_by == "none" ? std::string() : a.group_by;
  const auto m = eval::compute_metrics(preds, labels, group_by.empty() ? std::vector<std::string>{} : groups,
                                       table.class_names(), group_by, a.tag.empty() ? table.model_tag() : a.tag);
  std::string md;
  if (a.group_by == "source")
    md = eval::render_report(m, eval::Layout::task1_per_source);
  else if (a.group_by == "gender")
    md = eval::render_report(m, eval::Layout::task2_gender);
  else
    md = eval::render_comparison({m}, eval::ComparisonLayout::model_summary);
  out << md;
  out << fmt::format("macro F1 {:.4f}, accuracy {:.4f}, group mean {:.4f} over {} scans\n", m.overall_macro_f1,
                     m.accuracy, m.group_mean_macro_f1, m.n_samples);
  if (!a.out.empty()) {
    eval::write_metrics_json(a.out, m);
    echo_beside(a.out, cfg);
  }
  if (!a.table.empty()) write_text(a.table, md);
}

// ----------------------------------------------------------------------------------- report

struct ReportArgs {
  ConfigFlags flags;
  std::vector<std::string> metrics;
  std::string layout = "model_summary";
  std::string out;
  std::vector<std::string> loss_logs;
  std::string loss_plot;
  std::string bar_plot;
};

std::vector<std::pair<double, double>> loss_curve(const fs::path& log) {
  std::ifstream is(log);
  if (!is) throw RuntimeFailure("cannot read training log " + log.string());
  std::vector<std::pair<double, double>> pts;
  std::string line;
  long n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw RuntimeFailure(fmt::format("{}:{}: malformed log record", log.string(), n));
    if (j.value("type", "") == "step") pts.push_back({j.at("global_step").get<double>(), j.at("loss").get<double>()});
  }
  return pts;
}

void cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto cfg = a.flags.resolve();
  std::vector<eval::MetricsReport> reports;
  for (const auto& p : a.metrics) reports.push_back(eval::read_metrics_json(p));
  std::string md;
  if (!reports.empty()) {
    static const std::set<std::string> single{"task1_per_source", "task2_per_class", "task2_gender", "source", "class",
                                              "gender"};
    if (single.count(a.layout)) {
      HYBRIDCT_REQUIRE(reports.size() == 1, "layout '" + a.layout + "' renders exactly one metrics file");
      md = eval::render_report(reports.front(), eval::parse_layout(a.layout));
    } else {
      md = eval::render_comparison(reports, eval::parse_comparison_layout(a.layout));
    }
    out << md;
    if (!a.out.empty()) {
      write_text(a.out, md);
      echo_beside(a.out, cfg);
    }
  }
  if (!a.loss_plot.empty()) {
    HYBRIDCT_REQUIRE(!a.loss_logs.empty(), "--loss-plot needs at least one --loss-log");
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    for (const auto& log : a.loss_logs) series[fs::path(log).parent_path().filename().string() + " " + fs::path(log).stem().string()] = loss_curve(log);
    write_text(a.loss_plot, eval::svg_line_plot(series, "Training loss", "step", "loss"));
  }
  if (!a.bar_plot.empty()) {
    HYBRIDCT_REQUIRE(!reports.empty(), "--bar-plot needs metrics files");
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& r : reports) {
      if (r.per_group.empty()) {
        bars.push_back({r.model_tag, r.overall_macro_f1});
        continue;
      }
      std::vector<std::string> keys;
      for (const auto& [k, v] : r.per_group) keys.push_back(k);
      for (const auto& k : eval::natural_sorted(keys)) bars.push_back({r.model_tag + " " + k, r.per_group.at(k)});
    }
    write_text(a.bar_plot, eval::svg_bar_chart(bars, "Macro F1 per group"));
  }
  HYBRIDCT_REQUIRE(!reports.empty() || !a.loss_plot.empty(), "report needs metrics files or --loss-plot");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid 2.5D/3D CT classification pipeline"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate the synthetic multi-source phantom dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  synth.flags.attach(s, {{"--sources", "synth.n_sources"},
                         {"--classes", "synth.n_classes"},
                         {"--per-cell", "synth.n_scans_per_class_per_source"},
                         {"--side", "synth.volume_side"},
                         {"--strength", "synth.class_signature_strength"}});

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Slice stacks -> cleaned cubic volumes (content-hash cached)");
  p->add_option("--data", pre.data, "Dataset directory with manifest.csv")->required();
  p->add_option("--out", pre.out, "Output directory for .vol files")->required();
  pre.flags.attach(p, {{"--target-side", "preprocess.target_side"},
                       {"--denoise-sigma", "preprocess.denoise_sigma"},
                       {"--sharpen-amount", "preprocess.sharpen_amount"},
                       {"--sharpen-sigma", "preprocess.sharpen_sigma"}});

  TrainArgs t3, t25;
  for (auto* ta : {&t3, &t25}) {
    const bool is3d = ta == &t3;
    ta->branch = is3d ? "3d" : "25d";
    const std::string section = is3d ? "train3d" : "train25d";
    auto* t = app.add_subcommand(section, is3d ? "Train the 3D branch (VREx, then CE+SupCon+MixUp)"
                                               : "Train the 2.5D multi-view branch (three unfreezing stages)");
    t->add_option("--data", ta->data, "Preprocessed directory (manifest.csv + .vol files)")->required();
    t->add_option("--run-dir", ta->run_dir, "Run directory; relative paths live under the run root");
    t->add_flag("--resume", ta->resume, "Continue from <run-dir>/last.ckpt");
    t->add_option("--stop-after-epochs", ta->stop_after, "Stop after this many epochs in total (0 = all)");
    std::vector<std::pair<std::string, std::string>> aliases{{"--batch-size", section + ".batch_size"},
                                                             {"--epoch-factor", section + ".epoch_factor"}};
    if (!is3d) aliases.push_back({"--weights-path", "model25d.weights_path"});
    ta->flags.attach(t, aliases);
  }

  PredictArgs pr;
  auto* q = app.add_subcommand("predict", "Write a logit table for one split");
  q->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  q->add_option("--data", pr.data, "Preprocessed directory")->required();
  q->add_option("--split", pr.split, "val, train or all");
  q->add_option("--out", pr.out, "Logit CSV to write")->required();
  q->add_option("--predictions", pr.predictions, "Optional scan_id,predicted_label CSV");
  q->add_option("--tag", pr.tag, "Model tag stored in the table");
  pr.flags.attach(q, {});

  EnsembleArgs en;
  auto* e = app.add_subcommand("ensemble", "Weighted fusion of two logit tables; w weights the first");
  e->add_option("inputs", en.inputs, "2.5D logits then 3D logits")->required()->expected(2);
  e->add_option("--space", en.space, "logits or probabilities");
  e->add_option("--out", en.out, "Fused logit CSV")->required();
  e->add_option("--predictions", en.predictions, "Optional scan_id,predicted_label CSV");
  en.flags.attach(e, {{"--w", "ensemble.w"}});

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Macro F1 overall and per group");
  v->add_option("--logits", ev.logits, "Logit CSV")->required();
  v->add_option("--data", ev.data, "Directory holding manifest.csv");
  v->add_option("--manifest", ev.manifest, "Manifest CSV (instead of --data)");
  v->add_option("--group-by", ev.group_by, "source, gender or none");
  v->add_option("--out", ev.out, "Metrics JSON");
  v->add_option("--table", ev.table, "Markdown table");
  v->add_option("--tag", ev.tag, "Model tag (defaults to the table's)");
  ev.flags.attach(v, {});

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Markdown tables and SVG plots from metrics and logs");
  r->add_option("metrics", rp.metrics, "Metrics JSON files, one per model");
  r->add_option("--layout", rp.layout,
                "task1_per_source | task2_per_class | task2_gender | model_summary | source_comparison | "
                "class_comparison | test_hospitals | test_gender");
  r->add_option("--out", rp.out, "Markdown output");
  r->add_option("--loss-log", rp.loss_logs, "Training log.jsonl (repeatable)");
  r->add_option("--loss-plot", rp.loss_plot, "SVG loss curve output");
  r->add_option("--bar-plot", rp.bar_plot, "SVG per-group F1 bar chart output");
  rp.flags.attach(r, {});

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (s->parsed()) cmd_synth(synth, out);
    else if (p->parsed()) cmd_preprocess(pre, out);
    else if (app.got_subcommand("train3d")) cmd_train(t3, out);
    else if (app.got_subcommand("train25d")) cmd_train(t25, out);
    else if (q->parsed()) cmd_predict(pr, out);
    else if (e->parsed()) cmd_ensemble(en, out);
    else if (v->parsed()) cmd_evaluate(ev, out);
    else if (r->parsed()) cmd_report(rp, out);
    return kExitOk;
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace hybridct::cli

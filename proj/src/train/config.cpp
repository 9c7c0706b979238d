// SPDX-License-Identifier: Apache-2.0
#include "hybridct/train/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::train {

Profile parse_profile(const std::string& s) {
  if (s == "desk") return Profile::desk;
  if (s == "paper") return Profile::paper;
  throw ValidationError("unknown profile '" + s + "' (expected desk or paper)");
}

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

namespace {

YAML::Node plan_node(const std::vector<StagePlan>& plans) {
  YAML::Node seq(YAML::NodeType::Sequence);
  for (const auto& p : plans) {
    YAML::Node n;
    n["name"] = p.name;
    n["epochs"] = p.epochs;
    n["base_lr"] = p.base_lr;
    n["schedule"] = to_string(p.schedule);
    n["warmup_frac"] = p.warmup_frac;
    n["weight_decay"] = p.weight_decay;
    n["losses"] = to_string(p.losses);
    n["trainability_stage"] = p.trainability_stage;
    seq.push_back(n);
  }
  return seq;
}

YAML::Node deep_copy(const YAML::Node& n) { return YAML::Load(YAML::Dump(n)); }

// Maps are merged key by key; any other node replaces the default.
void merge(YAML::Node base, const YAML::Node& over, const std::string& path) {
  for (const auto& kv : over) {
    const std::string key = kv.first.as<std::string>();
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base[key]) throw ValidationError("unknown config key '" + where + "'");
    if (base[key].IsMap() && kv.second.IsMap())
      merge(base[key], kv.second, where);
    else if (base[key].IsMap())
      throw ValidationError("config key '" + where + "' must be a mapping");
    else
      base[key] = deep_copy(kv.second);
  }
}

void set_path(YAML::Node root, const std::string& dotted, const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  HYBRIDCT_REQUIRE(!parts.empty(), "empty override key");
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next || !next.IsMap()) throw ValidationError("unknown config key '" + dotted + "'");
    chain.push_back(next);
  }
  YAML::Node leaf = chain.back();
  if (!leaf[parts.back()]) throw ValidationError("unknown config key '" + dotted + "'");
  if (leaf[parts.back()].IsMap()) throw ValidationError("config key '" + dotted + "' is a section");
  leaf[parts.back()] = YAML::Load(value);
}

template <typename T>
T get(const YAML::Node& n, const std::string& key, const std::string& section) {
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ValidationError(fmt::format("config key '{}.{}' has an invalid value", section, key));
  }
}

std::vector<StagePlan> parse_plans(const YAML::Node& seq, const std::string& section) {
  HYBRIDCT_REQUIRE(seq.IsSequence() && seq.size() > 0, section + ".stages must be a non-empty list");
  std::vector<StagePlan> out;
  for (const auto& n : seq) {
    StagePlan p;
    p.name = get<std::string>(n, "name", section);
    p.epochs = get<int>(n, "epochs", section);
    p.base_lr = get<double>(n, "base_lr", section);
    p.schedule = parse_schedule(get<std::string>(n, "schedule", section));
    p.warmup_frac = get<double>(n, "warmup_frac", section);
    p.weight_decay = get<double>(n, "weight_decay", section);
    p.losses = parse_loss_kind(get<std::string>(n, "losses", section));
    p.trainability_stage = get<int>(n, "trainability_stage", section);
    p.validate();
    out.push_back(p);
  }
  return out;
}

}  // namespace

YAML::Node default_tree(Profile profile) {
  const bool desk = profile == Profile::desk;
  YAML::Node t;
  t["profile"] = to_string(profile);
  t["seed"] = 0;

  const synth::SynthSpec s;
  YAML::Node syn;
  syn["n_scans_per_class_per_source"] = desk ? 26 : s.n_scans_per_class_per_source;
  syn["n_classes"] = s.n_classes;
  syn["n_sources"] = s.n_sources;
  syn["volume_side"] = s.volume_side;
  syn["class_signature_strength"] = s.class_signature_strength;
  syn["gender_ratio"] = s.gender_ratio;
  syn["val_per_cell"] = s.val_per_cell;
  syn["val_fraction"] = desk ? 0.23 : s.val_fraction;
  syn["duplicate_slice_prob"] = s.duplicate_slice_prob;
  t["synth"] = syn;

  const preprocess::PreprocCfg pp;
  YAML::Node pre;
  pre["target_side"] = desk ? 32 : pp.target_side;
  pre["denoise_sigma"] = pp.denoise_sigma;
  pre["sharpen_amount"] = pp.sharpen_amount;
  pre["sharpen_sigma"] = pp.sharpen_sigma;
  t["preprocess"] = pre;

  YAML::Node m3;
  m3["width_multiplier"] = desk ? 0.25 : 1.0;
  m3["projection_dim"] = 128;
  t["model3d"] = m3;

  YAML::Node m25;
  m25["backbone_kind"] = desk ? "builtin_small_transformer" : "external_pretrained";
  m25["slice_size"] = desk ? 64 : 224;
  m25["k_slices"] = 10;
  m25["patch_size"] = 16;
  m25["depth"] = desk ? 4 : 12;
  m25["embedding_dim"] = desk ? 64 : 768;
  m25["n_heads"] = desk ? 4 : 12;
  m25["mlp_ratio"] = 4;
  m25["n_layer_groups"] = 4;
  m25["projection_dim"] = desk ? 128 : 512;
  m25["pooling"] = desk ? "mean" : "cls";
  m25["weights_path"] = "";
  t["model25d"] = m25;

  YAML::Node obj;
  obj["lambda_vrex"] = 1.0;
  obj["supcon_tau"] = 0.07;
  obj["supcon_weight"] = 0.5;
  obj["mixup_alpha"] = 0.4;
  obj["mixup_enabled"] = true;
  obj["domain_key"] = "source";
  t["objectives"] = obj;

  const AugCfg a;
  YAML::Node aug;
  aug["enabled"] = true;
  aug["rot_deg"] = a.rot_deg;
  aug["hflip_p"] = a.hflip_p;
  aug["scale_min"] = a.scale_min;
  aug["scale_max"] = a.scale_max;
  aug["brightness"] = a.brightness;
  aug["contrast"] = a.contrast;
  aug["noise_sigma"] = a.noise_sigma;
  aug["cutout_frac"] = a.cutout_frac;
  aug["op_p"] = a.op_p;
  t["augment"] = aug;

  YAML::Node opt;
  opt["beta1"] = 0.9;
  opt["beta2"] = 0.999;
  opt["eps"] = 1e-8;
  t["optim"] = opt;

  YAML::Node t3;
  t3["batch_size"] = 8;
  t3["epoch_factor"] = desk ? 0.2 : 1.0;
  t3["stages"] = plan_node(plan_3d());
  t["train3d"] = t3;

  YAML::Node t25;
  t25["batch_size"] = 4;
  t25["epoch_factor"] = desk ? 0.4 : 1.0;
  t25["stages"] = plan_node(plan_25d());
  t["train25d"] = t25;

  YAML::Node ens;
  ens["w"] = 0.5;
  t["ensemble"] = ens;
  return t;
}

RunConfig resolve_config(const std::filesystem::path& file, const Overrides& overrides) {
  YAML::Node from_file;
  if (!file.empty()) {
    if (!std::filesystem::exists(file)) throw ValidationError("config file not found: " + file.string());
    try {
      from_file = YAML::LoadFile(file.string());
    } catch (const YAML::Exception& e) {
      throw ValidationError(fmt::format("{}: {}", file.string(), e.what()));
    }
    if (from_file.IsNull()) from_file = YAML::Node(YAML::NodeType::Map);
    if (!from_file.IsMap()) throw ValidationError(file.string() + ": top level must be a mapping");
  }
  std::string profile = "desk";
  if (from_file && from_file["profile"]) profile = from_file["profile"].as<std::string>();
  for (const auto& [k, v] : overrides)
    if (k == "profile") profile = v;

  YAML::Node tree = default_tree(parse_profile(profile));
  if (from_file) merge(tree, from_file, "");
  for (const auto& [k, v] : overrides) set_path(tree, k, v);
  tree["profile"] = profile;
  return parse_config(tree);
}

RunConfig parse_config(const YAML::Node& t) {
  RunConfig c;
  c.resolved = deep_copy(t);
  c.profile = parse_profile(get<std::string>(t, "profile", "root"));
  c.seed = get<std::uint64_t>(t, "seed", "root");

  const auto syn = t["synth"];
  c.synth.n_scans_per_class_per_source = get<int>(syn, "n_scans_per_class_per_source", "synth");
  c.synth.n_classes = get<int>(syn, "n_classes", "synth");
  c.synth.n_sources = get<int>(syn, "n_sources", "synth");
  c.synth.volume_side = get<int>(syn, "volume_side", "synth");
  c.synth.class_signature_strength = get<double>(syn, "class_signature_strength", "synth");
  c.synth.gender_ratio = get<double>(syn, "gender_ratio", "synth");
  c.synth.val_per_cell = get<int>(syn, "val_per_cell", "synth");
  c.synth.val_fraction = get<double>(syn, "val_fraction", "synth");
  c.synth.duplicate_slice_prob = get<double>(syn, "duplicate_slice_prob", "synth");
  c.synth.seed = c.seed;
  c.synth.validate();

  const auto pre = t["preprocess"];
  c.preprocess.target_side = get<int>(pre, "target_side", "preprocess");
  c.preprocess.denoise_sigma = get<double>(pre, "denoise_sigma", "preprocess");
  c.preprocess.sharpen_amount = get<double>(pre, "sharpen_amount", "preprocess");
  c.preprocess.sharpen_sigma = get<double>(pre, "sharpen_sigma", "preprocess");
  c.preprocess.validate();

  const auto m3 = t["model3d"];
  c.model3d.n_classes = c.synth.n_classes;
  c.model3d.width_multiplier = get<double>(m3, "width_multiplier", "model3d");
  c.model3d.projection_dim = get<int>(m3, "projection_dim", "model3d");
  c.model3d.input_side = c.preprocess.target_side;
  c.model3d.validate();

  const auto m25 = t["model25d"];
  auto& e = c.model25d;
  e.backbone_kind = nn::parse_backbone_kind(get<std::string>(m25, "backbone_kind", "model25d"));
  e.slice_size = get<int>(m25, "slice_size", "model25d");
  e.k_slices = get<int>(m25, "k_slices", "model25d");
  e.patch_size = get<int>(m25, "patch_size", "model25d");
  e.depth = get<int>(m25, "depth", "model25d");
  e.embedding_dim = get<int>(m25, "embedding_dim", "model25d");
  e.n_heads = get<int>(m25, "n_heads", "model25d");
  e.mlp_ratio = get<int>(m25, "mlp_ratio", "model25d");
  e.n_layer_groups = get<int>(m25, "n_layer_groups", "model25d");
  e.projection_dim = get<int>(m25, "projection_dim", "model25d");
  e.pooling = nn::parse_pooling(get<std::string>(m25, "pooling", "model25d"));
  e.weights_path = get<std::string>(m25, "weights_path", "model25d");
  e.n_classes = c.synth.n_classes;
  e.validate();
  multiview::ViewCfg{e.k_slices, e.slice_size}.validate();
  HYBRIDCT_REQUIRE(e.k_slices <= c.preprocess.target_side, "model25d.k_slices exceeds the volume side");

  const auto obj = t["objectives"];
  const auto aug = t["augment"];
  const auto opt = t["optim"];
  auto fill_train = [&](TrainCfg& tc, const YAML::Node& sec, const std::string& name, double& factor) {
    tc.batch_size = get<int>(sec, "batch_size", name);
    factor = get<double>(sec, "epoch_factor", name);
    tc.plans = scale_epochs(parse_plans(sec["stages"], name), factor);
    tc.vrex.lambda_vrex = get<double>(obj, "lambda_vrex", "objectives");
    tc.supcon.tau = get<double>(obj, "supcon_tau", "objectives");
    tc.supcon.weight = get<double>(obj, "supcon_weight", "objectives");
    tc.mixup.alpha = get<double>(obj, "mixup_alpha", "objectives");
    tc.mixup.enabled = get<bool>(obj, "mixup_enabled", "objectives");
    tc.domain_key = parse_domain_key(get<std::string>(obj, "domain_key", "objectives"));
    tc.augment = get<bool>(aug, "enabled", "augment");
    tc.aug.rot_deg = get<double>(aug, "rot_deg", "augment");
    tc.aug.hflip_p = get<double>(aug, "hflip_p", "augment");
    tc.aug.scale_min = get<double>(aug, "scale_min", "augment");
    tc.aug.scale_max = get<double>(aug, "scale_max", "augment");
    tc.aug.brightness = get<double>(aug, "brightness", "augment");
    tc.aug.contrast = get<double>(aug, "contrast", "augment");
    tc.aug.noise_sigma = get<double>(aug, "noise_sigma", "augment");
    tc.aug.cutout_frac = get<double>(aug, "cutout_frac", "augment");
    tc.aug.op_p = get<double>(aug, "op_p", "augment");
    tc.optim.beta1 = get<double>(opt, "beta1", "optim");
    tc.optim.beta2 = get<double>(opt, "beta2", "optim");
    tc.optim.eps = get<double>(opt, "eps", "optim");
    tc.seed = c.seed;
    tc.validate();
  };
  fill_train(c.train3d, t["train3d"], "train3d", c.epoch_factor_3d);
  fill_train(c.train25d, t["train25d"], "train25d", c.epoch_factor_25d);

  c.ensemble_w = get<double>(t["ensemble"], "w", "ensemble");
  HYBRIDCT_REQUIRE(c.ensemble_w >= 0 && c.ensemble_w <= 1, "ensemble.w must be in [0, 1]");
  return c;
}

void write_config_echo(const std::filesystem::path& path, const RunConfig& cfg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw RuntimeFailure("cannot write " + path.string());
  YAML::Emitter out;
  out << cfg.resolved;
  os << out.c_str() << '\n';
}

}  // namespace hybridct::train

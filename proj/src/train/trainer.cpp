// SPDX-License-Identifier: Apache-2.0
#include "hybridct/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"
#include "hybridct/core/hash.hpp"
#include "hybridct/eval/eval.hpp"
#include "hybridct/nn/checkpoint.hpp"
#include "hybridct/nn/optimizer.hpp"

namespace hybridct::train {

using nlohmann::json;

void TrainCfg::validate() const {
  HYBRIDCT_REQUIRE(!plans.empty(), "training needs at least one stage");
  for (const auto& p : plans) p.validate();
  HYBRIDCT_REQUIRE(batch_size >= 1, "batch_size must be >= 1");
  HYBRIDCT_REQUIRE(optim.beta1 >= 0 && optim.beta1 < 1 && optim.beta2 >= 0 && optim.beta2 < 1, "Adam betas must be in [0, 1)");
  HYBRIDCT_REQUIRE(optim.eps > 0, "Adam eps must be > 0");
  HYBRIDCT_REQUIRE(stop_after_epochs >= 0, "stop_after_epochs must be >= 0");
  vrex.validate();
  supcon.validate();
  mixup.validate();
  aug.validate();
}

json TrainState::to_json() const {
  json j;
  j["stage_index"] = stage_index;
  j["epoch"] = epoch;
  j["global_step"] = global_step;
  j["seed"] = seed;
  j["best_val_metric"] = best_val_metric;
  j["best_checkpoint"] = best_checkpoint.string();
  j["last_checkpoint"] = last_checkpoint.string();
  j["log_lines"] = log_lines;
  j["finished"] = finished;
  j["loss_history"] = loss_history;
  j["history"] = json::array();
  for (const auto& e : history)
    j["history"].push_back({{"stage", e.stage}, {"epoch", e.epoch}, {"global_step", e.global_step},
                            {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"val_macro_f1", e.val_macro_f1}});
  j["stages"] = json::array();
  for (const auto& s : stages)
    j["stages"].push_back({{"name", s.name}, {"epochs", s.epochs}, {"steps", s.steps},
                           {"backbone_checksum_before", s.backbone_checksum_before},
                           {"backbone_checksum_after", s.backbone_checksum_after},
                           {"frozen_checksum_before", s.frozen_checksum_before},
                           {"frozen_checksum_after", s.frozen_checksum_after}});
  return j;
}

TrainState TrainState::from_json(const json& j) {
  TrainState s;
  s.stage_index = j.at("stage_index");
  s.epoch = j.at("epoch");
  s.global_step = j.at("global_step");
  s.seed = j.at("seed");
  s.best_val_metric = j.at("best_val_metric");
  s.best_checkpoint = j.at("best_checkpoint").get<std::string>();
  s.last_checkpoint = j.at("last_checkpoint").get<std::string>();
  s.log_lines = j.at("log_lines");
  s.finished = j.at("finished");
  s.loss_history = j.at("loss_history").get<std::vector<double>>();
  for (const auto& e : j.at("history"))
    s.history.push_back({e.at("stage"), e.at("epoch"), e.at("global_step"), e.at("train_loss"), e.at("val_loss"),
                         e.at("val_macro_f1")});
  for (const auto& r : j.at("stages"))
    s.stages.push_back({r.at("name"), r.at("epochs"), r.at("steps"), r.at("backbone_checksum_before"),
                        r.at("backbone_checksum_after"), r.at("frozen_checksum_before"), r.at("frozen_checksum_after")});
  return s;
}

std::string parameter_checksum(const nn::ParamList& params) {
  Sha256 h;
  for (const nn::Parameter* p : params) {
    h.update(p->name);
    h.update(p->value.shape_string());
    h.update(std::as_bytes(p->value.values()));
  }
  return h.hex_digest();
}

std::vector<std::vector<int>> make_batches(const Dataset& data, const std::vector<int>& train_idx, int batch_size,
                                           bool stratify, DomainKey key, Rng& rng) {
  std::vector<int> order;
  if (stratify) {
    std::map<int, std::vector<int>> by_domain;
    for (int i : train_idx) by_domain[data.domain_of(i, key)].push_back(i);
    std::vector<std::vector<int>> queues;
    for (auto& [d, members] : by_domain) {
      std::shuffle(members.begin(), members.end(), rng);
      queues.push_back(std::move(members));
    }
    std::shuffle(queues.begin(), queues.end(), rng);
    for (std::size_t round = 0; order.size() < train_idx.size(); ++round)
      for (const auto& q : queues)
        if (round < q.size()) order.push_back(q[round]);
  } else {
    order = train_idx;
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<int>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + i, order.begin() + std::min(order.size(), i + batch_size));
  return batches;
}

Tensor predict_logits(nn::ClassifierBranch& model, const Dataset& data, const std::vector<int>& idx, int batch_size) {
  const InputSpec spec = InputSpec::for_model(model.kind(), model.sample_shape());
  Tensor out({static_cast<int>(idx.size()), model.n_classes()});
  for (std::size_t i = 0; i < idx.size(); i += batch_size) {
    const std::vector<int> chunk(idx.begin() + i, idx.begin() + std::min(idx.size(), i + batch_size));
    const Tensor x = make_batch(data, chunk, spec, nullptr, 0, 0, 0);
    const auto res = model.forward(x, false);
    std::copy(res.logits.values().begin(), res.logits.values().end(), out.data() + i * model.n_classes());
  }
  return out;
}

namespace {

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](float v) { return std::isfinite(v); });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  std::vector<int> shape = a.shape();
  shape[0] = a.dim(0) + b.dim(0);
  Tensor out(shape);
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  return out;
}

Tensor rows(const Tensor& t, int begin, int end) {
  std::vector<int> shape = t.shape();
  shape[0] = end - begin;
  Tensor out(shape);
  const std::size_t r = t.row_size();
  std::copy_n(t.data() + begin * r, (end - begin) * r, out.data());
  return out;
}

class JsonlLog {
 public:
  JsonlLog() = default;
  JsonlLog(const std::filesystem::path& path, long keep_lines) : path_(path) {
    std::vector<std::string> kept;
    if (keep_lines > 0) {
      std::ifstream is(path);
      std::string line;
      while (static_cast<long>(kept.size()) < keep_lines && std::getline(is, line)) kept.push_back(line);
    }
    os_.open(path, std::ios::trunc);
    if (!os_) throw RuntimeFailure("cannot write training log " + path.string());
    for (const auto& l : kept) os_ << l << '\n';
    lines_ = static_cast<long>(kept.size());
  }
  void write(const json& j) {
    if (!os_.is_open()) return;
    os_ << j.dump() << '\n';
    os_.flush();
    ++lines_;
  }
  long lines() const { return lines_; }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
  long lines_ = 0;
};

struct StepResult {
  double total = 0.0;
  json components;
};

[[noreturn]] void abort_non_finite(const TrainState& st, const StagePlan& plan, const json& components) {
  throw RuntimeFailure(fmt::format("non-finite loss at step {} (stage {}, epoch {}): {}", st.global_step, plan.name,
                                   st.epoch + 1, components.dump()));
}

StepResult train_step(nn::ClassifierBranch& model, const StagePlan& plan, const TrainCfg& cfg, const Tensor& x,
                      const std::vector<int>& labels, const std::vector<int>& domains, Rng& mix_rng,
                      const TrainState& st) {
  StepResult r;
  const int B = x.dim(0);
  switch (plan.losses) {
    case LossKind::vrex: {
      const auto out = model.forward(x, true);
      if (!all_finite(out.logits)) abort_non_finite(st, plan, {{"logits", "non-finite"}});
      obj::Mat g;
      const auto terms = obj::vrex_objective(obj::to_mat(out.logits), labels, domains, cfg.vrex.lambda_vrex, &g);
      r.total = terms.total;
      r.components = {{"vrex", terms.total}, {"domains", terms.domains}, {"domain_ce", terms.domain_ce}};
      if (!std::isfinite(r.total)) abort_non_finite(st, plan, r.components);
      model.backward(obj::to_tensor(g), nullptr);
      break;
    }
    case LossKind::ce: {
      const auto out = model.forward(x, true);
      if (!all_finite(out.logits)) abort_non_finite(st, plan, {{"logits", "non-finite"}});
      obj::Mat g;
      r.total = obj::cross_entropy(obj::to_mat(out.logits), labels, &g);
      r.components = {{"ce", r.total}};
      if (!std::isfinite(r.total)) abort_non_finite(st, plan, r.components);
      model.backward(obj::to_tensor(g), nullptr);
      break;
    }
    case LossKind::ce_supcon_mixup: {
      obj::SupConCfg supcon = cfg.supcon;
      if (!model.has_projection()) supcon.weight = 0.0;
      const bool use_mix = cfg.mixup.enabled && B >= 2;
      obj::MixUpBatch mix;
      nn::BranchOutput out;
      Tensor logits, proj;
      if (use_mix) {
        // Mixed half feeds the CE term, unmixed half the contrastive term.
        mix = obj::mixup(x, labels, cfg.mixup.alpha, mix_rng);
        out = model.forward(concat_rows(mix.mixed, x), true);
        logits = rows(out.logits, 0, B);
        if (!out.projection.empty()) proj = rows(out.projection, B, 2 * B);
      } else {
        out = model.forward(x, true);
        logits = out.logits;
        proj = out.projection;
      }
      if (!all_finite(out.logits) || !all_finite(out.projection))
        abort_non_finite(st, plan, {{"outputs", "non-finite"}});
      const obj::MixState state{mix.labels_a, mix.labels_b, mix.lam};
      obj::Mat dl, dp;
      const obj::Mat pm = proj.empty() ? obj::Mat::Zero(B, 1) : obj::to_mat(proj);
      const auto terms = obj::stage2_total_loss(obj::to_mat(logits), pm, labels, supcon, use_mix ? &state : nullptr,
                                                &dl, &dp);
      r.total = terms.total;
      r.components = {{"ce", terms.ce}, {"supcon", terms.supcon}, {"lam", use_mix ? mix.lam : 1.0}};
      if (!std::isfinite(r.total)) abort_non_finite(st, plan, r.components);
      Tensor d_logits = obj::to_tensor(dl);
      Tensor d_proj;
      if (!proj.empty()) d_proj = obj::to_tensor(dp);
      if (use_mix) {
        d_logits = concat_rows(d_logits, Tensor(d_logits.shape()));
        if (!d_proj.empty()) d_proj = concat_rows(Tensor(d_proj.shape()), d_proj);
      }
      model.backward(d_logits, d_proj.empty() ? nullptr : &d_proj);
      break;
    }
  }
  return r;
}

nn::ParamList backbone_params(nn::ClassifierBranch& model) {
  nn::ParamList out;
  for (nn::Parameter* p : model.parameters())
    if (p->backbone) out.push_back(p);
  return out;
}

nn::ParamList frozen_params(nn::ClassifierBranch& model) {
  nn::ParamList out;
  for (nn::Parameter* p : model.parameters())
    if (!p->trainable) out.push_back(p);
  return out;
}

}  // namespace

TrainState train_branch(nn::ClassifierBranch& model, const Dataset& data, const TrainCfg& cfg) {
  cfg.validate();
  const std::vector<int> train_idx = data.indices(Split::train);
  const std::vector<int> val_idx = data.indices(Split::val);
  if (train_idx.empty()) throw ValidationError("training split is empty");
  const InputSpec spec = InputSpec::for_model(model.kind(), model.sample_shape());
  const bool write = !cfg.run_dir.empty();
  if (write) std::filesystem::create_directories(cfg.run_dir);
  const auto last_path = cfg.run_dir / "last.ckpt";
  const auto best_path = cfg.run_dir / "best.ckpt";

  TrainState st;
  st.seed = cfg.seed;
  std::optional<nn::Archive> resumed;
  if (cfg.resume && write && std::filesystem::exists(last_path)) {
    resumed = nn::read_archive(last_path);
    if (resumed->arch != model.arch())
      throw ValidationError("cannot resume: checkpoint architecture differs from the configured model");
    nn::restore_model(model, *resumed);
    st = TrainState::from_json(resumed->meta.at("train_state"));
    if (st.seed != cfg.seed) throw ValidationError("cannot resume: checkpoint was trained with a different seed");
  }
  JsonlLog log = write ? JsonlLog(cfg.run_dir / "log.jsonl", resumed ? st.log_lines : 0) : JsonlLog();

  auto checkpoint_meta = [&]() {
    st.log_lines = log.lines();
    return json{{"train_state", st.to_json()}, {"kind", model.kind()}};
  };

  int epochs_this_call = 0;
  for (; st.stage_index < static_cast<int>(cfg.plans.size()); ++st.stage_index, st.epoch = 0) {
    const StagePlan& plan = cfg.plans[st.stage_index];
    model.set_trainable_stage(plan.trainability_stage);
    nn::AdamW opt(model.parameters(), {cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps, plan.weight_decay});
    const bool fresh_stage = st.epoch == 0;
    if (!fresh_stage && resumed) opt.load_state(resumed->tensors);
    if (fresh_stage) {
      StageRecord rec;
      rec.name = plan.name;
      rec.epochs = plan.epochs;
      rec.backbone_checksum_before = parameter_checksum(backbone_params(model));
      rec.frozen_checksum_before = parameter_checksum(frozen_params(model));
      st.stages.push_back(rec);
      log.write({{"type", "stage_start"}, {"stage", st.stage_index}, {"name", plan.name}, {"epochs", plan.epochs},
                 {"base_lr", plan.base_lr}, {"schedule", to_string(plan.schedule)}, {"warmup_frac", plan.warmup_frac},
                 {"weight_decay", plan.weight_decay}, {"losses", to_string(plan.losses)},
                 {"trainability_stage", plan.trainability_stage}, {"global_step", st.global_step}});
    }
    const long steps_per_epoch = static_cast<long>((train_idx.size() + cfg.batch_size - 1) / cfg.batch_size);
    const long total_steps = steps_per_epoch * plan.epochs;
    const bool stratify = plan.losses == LossKind::vrex;

    for (; st.epoch < plan.epochs; ++st.epoch) {
      if (cfg.stop_after_epochs > 0 && epochs_this_call >= cfg.stop_after_epochs) return st;
      const auto stage_key = static_cast<std::uint64_t>(st.stage_index);
      const auto epoch_key = static_cast<std::uint64_t>(st.epoch);
      Rng order_rng = derive_rng(cfg.seed, {stage_key, epoch_key, 0xBA7C4ull});
      const auto batches = make_batches(data, train_idx, cfg.batch_size, stratify, cfg.domain_key, order_rng);
      double loss_sum = 0.0;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        const long step_in_stage = st.epoch * steps_per_epoch + static_cast<long>(b);
        const double lr = lr_for(plan, step_in_stage, total_steps);
        const auto& idx = batches[b];
        const Tensor x = make_batch(data, idx, spec, cfg.augment ? &cfg.aug : nullptr, cfg.seed, stage_key, epoch_key);
        std::vector<int> labels, domains;
        std::map<std::string, int> audit;
        for (int i : idx) {
          labels.push_back(data.at(i).record.label);
          domains.push_back(data.domain_of(i, cfg.domain_key));
          ++audit[data.group_of(i, cfg.domain_key)];
        }
        Rng mix_rng = derive_rng(cfg.seed, {stage_key, epoch_key, 0x313ull, b});
        opt.zero_grad();
        const StepResult r = train_step(model, plan, cfg, x, labels, domains, mix_rng, st);
        opt.step(lr);
        loss_sum += r.total;
        st.loss_history.push_back(r.total);
        log.write({{"type", "step"}, {"stage", st.stage_index}, {"epoch", st.epoch + 1}, {"step", step_in_stage},
                   {"global_step", st.global_step}, {"lr", lr}, {"loss", r.total}, {"components", r.components},
                   {"batch_domains", audit}});
        ++st.global_step;
      }
      ++epochs_this_call;

      EpochRecord rec{st.stage_index, st.epoch + 1, st.global_step, loss_sum / static_cast<double>(batches.size()),
                      0.0, -1.0};
      if (!val_idx.empty()) {
        const Tensor logits = predict_logits(model, data, val_idx, cfg.batch_size);
        std::vector<int> labels, preds;
        for (int i : val_idx) labels.push_back(data.at(i).record.label);
        for (int i = 0; i < logits.dim(0); ++i) {
          const float* row = logits.data() + static_cast<std::size_t>(i) * logits.dim(1);
          preds.push_back(static_cast<int>(std::max_element(row, row + logits.dim(1)) - row));
        }
        rec.val_loss = obj::cross_entropy(obj::to_mat(logits), labels);
        rec.val_macro_f1 = eval::macro_f1(preds, labels, model.n_classes());
      }
      st.history.push_back(rec);
      log.write({{"type", "epoch"}, {"stage", rec.stage}, {"epoch", rec.epoch}, {"global_step", rec.global_step},
                 {"train_loss", rec.train_loss}, {"val_loss", rec.val_loss}, {"val_macro_f1", rec.val_macro_f1}});

      const bool last_epoch = st.epoch + 1 == plan.epochs;
      if (last_epoch) {
        auto& srec = st.stages.back();
        srec.steps = total_steps;
        srec.backbone_checksum_after = parameter_checksum(backbone_params(model));
        srec.frozen_checksum_after = parameter_checksum(frozen_params(model));
        log.write({{"type", "stage_end"}, {"stage", st.stage_index}, {"name", plan.name}, {"global_step", st.global_step},
                   {"backbone_checksum_before", srec.backbone_checksum_before},
                   {"backbone_checksum_after", srec.backbone_checksum_after},
                   {"frozen_checksum_before", srec.frozen_checksum_before},
                   {"frozen_checksum_after", srec.frozen_checksum_after}});
      }
      // The saved state already points at the next epoch.
      ++st.epoch;
      const bool improved = rec.val_macro_f1 > st.best_val_metric;
      if (improved) st.best_val_metric = rec.val_macro_f1;
      if (write) {
        st.last_checkpoint = last_path;
        if (improved) st.best_checkpoint = best_path;
        if (st.stage_index + 1 == static_cast<int>(cfg.plans.size()) && last_epoch) st.finished = true;
        const json meta = checkpoint_meta();
        if (improved) nn::save_checkpoint(best_path, model, nullptr, meta);
        nn::save_checkpoint(last_path, model, &opt, meta);
      }
      --st.epoch;
    }
  }
  st.finished = true;
  st.stage_index = static_cast<int>(cfg.plans.size()) - 1;
  st.epoch = cfg.plans.back().epochs;
  return st;
}

}  // namespace hybridct::train

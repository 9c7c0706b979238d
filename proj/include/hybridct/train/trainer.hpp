// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hybridct/nn/branch.hpp"
#include "hybridct/objectives/objectives.hpp"
#include "hybridct/train/augment.hpp"
#include "hybridct/train/dataset.hpp"
#include "hybridct/train/plan.hpp"
#include "json.hpp"

namespace hybridct::train {

struct OptimCfg {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainCfg {
  std::vector<StagePlan> plans;
  int batch_size = 8;
  OptimCfg optim;
  obj::VRExCfg vrex;
  obj::SupConCfg supcon;
  obj::MixUpCfg mixup;
  AugCfg aug;
  bool augment = true;
  DomainKey domain_key = DomainKey::source;
  std::uint64_t seed = 0;
  /// Receives log.jsonl, last.ckpt and best.ckpt; nothing is written when empty.
  std::filesystem::path run_dir;
  /// Continue from run_dir/last.ckpt when it exists.
  bool resume = false;
  /// Stop after this many completed epochs in total (resume testing); 0 = no limit.
  int stop_after_epochs = 0;

  void validate() const;
};

struct EpochRecord {
  int stage = 0;
  int epoch = 0;  // 1-based within the stage
  long global_step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct StageRecord {
  std::string name;
  int epochs = 0;
  long steps = 0;
  std::string backbone_checksum_before;
  std::string backbone_checksum_after;
  std::string frozen_checksum_before;
  std::string frozen_checksum_after;
};

struct TrainState {
  int stage_index = 0;
  int epoch = 0;  // epochs completed in stage_index
  long global_step = 0;
  std::uint64_t seed = 0;
  double best_val_metric = -1.0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::vector<EpochRecord> history;
  std::vector<StageRecord> stages;
  std::vector<double> loss_history;  // per optimization step
  long log_lines = 0;
  bool finished = false;

  nlohmann::json to_json() const;
  static TrainState from_json(const nlohmann::json& j);
};

/// Visits the batches of one epoch. With `stratify`, domains are interleaved round-robin so
/// consecutive samples come from different domains whenever several remain.
std::vector<std::vector<int>> make_batches(const Dataset& data, const std::vector<int>& train_idx, int batch_size,
                                           bool stratify, DomainKey key, Rng& rng);

/// Runs every stage of cfg.plans in order on the train split, validating on the val split.
TrainState train_branch(nn::ClassifierBranch& model, const Dataset& data, const TrainCfg& cfg);

/// Eval-mode logits [n, C] for samples `idx`.
Tensor predict_logits(nn::ClassifierBranch& model, const Dataset& data, const std::vector<int>& idx, int batch_size);

/// SHA-256 over names, shapes and values.
std::string parameter_checksum(const nn::ParamList& params);

}  // namespace hybridct::train

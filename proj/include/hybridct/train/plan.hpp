// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace hybridct::train {

enum class Schedule { cosine, constant };
enum class LossKind { vrex, ce_supcon_mixup, ce };

std::string to_string(Schedule s);
std::string to_string(LossKind k);
Schedule parse_schedule(const std::string& s);
LossKind parse_loss_kind(const std::string& s);

struct StagePlan {
  std::string name;
  int epochs = 1;
  double base_lr = 1e-4;
  Schedule schedule = Schedule::cosine;
  double warmup_frac = 0.0;
  double weight_decay = 0.0;
  LossKind losses = LossKind::ce;
  /// Argument to set_trainable_stage; 3 leaves every layer group trainable.
  int trainability_stage = 3;

  void validate() const;
};

/// VREx pretraining then CE + SupCon + MixUp fine-tuning.
std::vector<StagePlan> plan_3d();
/// Frozen backbone, upper groups unfrozen, full fine-tuning.
std::vector<StagePlan> plan_25d();

/// epochs -> max(1, round(epochs * factor)); everything else unchanged.
std::vector<StagePlan> scale_epochs(std::vector<StagePlan> plans, double factor);

/// Linear warmup over round(warmup_frac * total_steps) steps, then cosine decay to 0.
double lr_at(long step, long total_steps, double base_lr, double warmup_frac);
double lr_for(const StagePlan& plan, long step, long total_steps);

}  // namespace hybridct::train

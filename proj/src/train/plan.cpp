// SPDX-License-Identifier: Apache-2.0
#include "hybridct/train/plan.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::train {

std::string to_string(Schedule s) { return s == Schedule::cosine ? "cosine" : "constant"; }

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::vrex: return "vrex";
    case LossKind::ce_supcon_mixup: return "ce_supcon_mixup";
    case LossKind::ce: return "ce";
  }
  return "?";
}

Schedule parse_schedule(const std::string& s) {
  if (s == "cosine") return Schedule::cosine;
  if (s == "constant") return Schedule::constant;
  throw ValidationError("unknown schedule '" + s + "'");
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "vrex") return LossKind::vrex;
  if (s == "ce_supcon_mixup") return LossKind::ce_supcon_mixup;
  if (s == "ce") return LossKind::ce;
  throw ValidationError("unknown loss composition '" + s + "'");
}

void StagePlan::validate() const {
  const std::string who = name.empty() ? "stage" : "stage " + name;
  HYBRIDCT_REQUIRE(epochs >= 1, who + ": epochs must be >= 1");
  HYBRIDCT_REQUIRE(std::isfinite(base_lr) && base_lr > 0, who + ": base_lr must be > 0");
  HYBRIDCT_REQUIRE(warmup_frac >= 0 && warmup_frac < 0.5, fmt::format("{}: warmup_frac {} outside [0, 0.5)", who, warmup_frac));
  HYBRIDCT_REQUIRE(std::isfinite(weight_decay) && weight_decay >= 0, who + ": weight_decay must be >= 0");
  HYBRIDCT_REQUIRE(trainability_stage >= 1 && trainability_stage <= 3, who + ": trainability_stage must be 1, 2 or 3");
}

std::vector<StagePlan> plan_3d() {
  return {
      {"vrex", 5, 1e-4, Schedule::constant, 0.0, 1e-5, LossKind::vrex, 3},
      {"finetune", 20, 1e-5, Schedule::cosine, 0.0, 1e-5, LossKind::ce_supcon_mixup, 3},
  };
}

std::vector<StagePlan> plan_25d() {
  return {
      {"head", 10, 1e-3, Schedule::cosine, 0.05, 0.01, LossKind::ce, 1},
      {"upper", 15, 1e-4, Schedule::cosine, 0.05, 0.01, LossKind::ce, 2},
      {"full", 20, 5e-5, Schedule::cosine, 0.05, 0.01, LossKind::ce, 3},
  };
}

std::vector<StagePlan> scale_epochs(std::vector<StagePlan> plans, double factor) {
  HYBRIDCT_REQUIRE(std::isfinite(factor) && factor > 0, "epoch factor must be > 0");
  for (auto& p : plans) p.epochs = std::max(1, static_cast<int>(std::lround(p.epochs * factor)));
  return plans;
}

double lr_at(long step, long total_steps, double base_lr, double warmup_frac) {
  HYBRIDCT_REQUIRE(total_steps > 0, "lr_at: total_steps must be > 0");
  HYBRIDCT_REQUIRE(step >= 0 && step <= total_steps, fmt::format("lr_at: step {} outside [0, {}]", step, total_steps));
  const long warm = std::lround(warmup_frac * static_cast<double>(total_steps));
  if (step < warm) return base_lr * static_cast<double>(step) / static_cast<double>(warm);
  if (total_steps == warm) return base_lr;
  const double progress = static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double lr_for(const StagePlan& plan, long step, long total_steps) {
  if (plan.schedule == Schedule::constant) return plan.base_lr;
  return lr_at(step, total_steps, plan.base_lr, plan.warmup_frac);
}

}  // namespace hybridct::train

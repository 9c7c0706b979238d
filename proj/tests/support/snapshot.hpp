// SPDX-License-Identifier: Apache-2.0
// Published training constants compared field by field against a resolved config.
#pragma once

#include <string>
#include <vector>

#include <fmt/format.h>

#include "hybridct/train/config.hpp"

namespace hybridct::snapshot {

// Negative weight_decay leaves it unchecked; the published text states it for one stage only.
struct StageWant {
  int epochs;
  double lr;
  double weight_decay;
  double warmup;
  const char* schedule;
};

struct Diff {
  std::vector<std::string> lines;
  template <class T>
  void expect(const std::string& what, const T& got, const T& want) {
    if (!(got == want)) lines.push_back(fmt::format("{}: got {} want {}", what, got, want));
  }
};

inline void check_train(Diff& d, const std::string& name, const train::TrainCfg& t, const std::vector<StageWant>& want,
                        const std::vector<train::LossKind>& losses) {
  d.expect(name + ".stages", t.plans.size(), want.size());
  if (t.plans.size() != want.size()) return;
  for (std::size_t i = 0; i < want.size(); ++i) {
    const auto& p = t.plans[i];
    const std::string s = fmt::format("{}.stage{}", name, i + 1);
    d.expect(s + ".epochs", p.epochs, want[i].epochs);
    d.expect(s + ".lr", p.base_lr, want[i].lr);
    if (want[i].weight_decay >= 0) d.expect(s + ".weight_decay", p.weight_decay, want[i].weight_decay);
    d.expect(s + ".warmup", p.warmup_frac, want[i].warmup);
    d.expect(s + ".schedule", train::to_string(p.schedule), std::string(want[i].schedule));
    d.expect(s + ".losses", train::to_string(p.losses), train::to_string(losses[i]));
  }
  d.expect(name + ".lambda_vrex", t.vrex.lambda_vrex, 1.0);
  d.expect(name + ".supcon_tau", t.supcon.tau, 0.07);
  d.expect(name + ".mixup_alpha", t.mixup.alpha, 0.4);
  d.expect(name + ".mixup_enabled", t.mixup.enabled, true);
  d.expect(name + ".augment", t.augment, true);
  d.expect(name + ".rot_deg", t.aug.rot_deg, 15.0);
  d.expect(name + ".hflip_p", t.aug.hflip_p, 0.5);
  d.expect(name + ".scale_min", t.aug.scale_min, 0.8);
  d.expect(name + ".scale_max", t.aug.scale_max, 1.2);
  d.expect(name + ".noise_sigma", t.aug.noise_sigma, 0.01);
  d.expect(name + ".cutout_frac", t.aug.cutout_frac, 0.10);
}

/// Empty when every constant matches. Epoch counts are checked unscaled, so pass the paper profile.
inline std::vector<std::string> hyperparameter_diff(const train::RunConfig& c) {
  using train::LossKind;
  Diff d;
  check_train(d, "train3d", c.train3d, {{5, 1e-4, -1, 0.0, "constant"}, {20, 1e-5, 1e-5, 0.0, "cosine"}}, {LossKind::vrex, LossKind::ce_supcon_mixup});
  check_train(d, "train25d", c.train25d, {{10, 1e-3, -1, 0.05, "cosine"}, {15, 1e-4, -1, 0.05, "cosine"}, {20, 5e-5, -1, 0.05, "cosine"}},
              {LossKind::ce, LossKind::ce, LossKind::ce});
  for (int i = 0; i < static_cast<int>(c.train25d.plans.size()); ++i)
    d.expect(fmt::format("train25d.stage{}.trainability", i + 1), c.train25d.plans[i].trainability_stage, i + 1);
  return d.lines;
}

}  // namespace hybridct::snapshot

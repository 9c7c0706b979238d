// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "hybridct/nn/parameter.hpp"

namespace hybridct::nn {

struct AdamWCfg {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Decoupled-weight-decay Adam over a fixed parameter list. Frozen parameters are skipped
/// and keep their step count, so moments resume where they left off after unfreezing.
class AdamW {
 public:
  AdamW(ParamList params, AdamWCfg cfg);

  void zero_grad();
  void step(double lr);

  const AdamWCfg& cfg() const { return cfg_; }
  std::int64_t step_count(const std::string& param_name) const;

  /// Moments as "adam.m.<param>", "adam.v.<param>" and step counts as "adam.t.<param>".
  std::vector<std::pair<std::string, Tensor>> state() const;
  /// Restores moments from a name→tensor map; missing entries leave the state at zero.
  void load_state(const std::map<std::string, Tensor>& tensors);

 private:
  struct Slot {
    Parameter* param;
    Tensor m;
    Tensor v;
    std::int64_t t = 0;
  };
  AdamWCfg cfg_;
  std::vector<Slot> slots_;
};

}  // namespace hybridct::nn

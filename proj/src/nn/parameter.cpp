// SPDX-License-Identifier: Apache-2.0
#include "hybridct/nn/parameter.hpp"

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::nn {

bool backbone_group_trainable(int stage, int group, int n_groups) {
  switch (stage) {
    case 1: return false;
    case 2: return group > n_groups / 2;
    case 3: return true;
    default: throw ValidationError(fmt::format("unknown trainable stage {} (expected 1, 2 or 3)", stage));
  }
}

void apply_trainable_stage(const ParamList& params, int stage, int n_groups) {
  HYBRIDCT_REQUIRE(n_groups >= 2, "need at least two layer groups");
  for (Parameter* p : params) {
    if (!p->backbone) {
      p->trainable = true;
      continue;
    }
    p->trainable = backbone_group_trainable(stage, p->group, n_groups);
  }
}

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

}  // namespace hybridct::nn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "hybridct/core/tensor.hpp"

namespace hybridct::nn {

/// A learnable tensor with its gradient accumulator.
///
/// `group` orders backbone layers bottom (1) to top (n_layer_groups) for progressive
/// unfreezing; non-backbone parameters (fusion, heads) use group 0 and are always trainable.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  int group = 0;
  bool backbone = false;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

/// Non-learnable state that still belongs in a checkpoint (batch-norm running statistics).
struct Buffer {
  std::string name;
  Tensor* value;
};

using ParamList = std::vector<Parameter*>;
using BufferList = std::vector<Buffer>;

/// Trainable-by-stage rule shared by both branches: stage 1 freezes the whole backbone,
/// stage 2 opens the top half of the layer groups, stage 3 opens everything.
bool backbone_group_trainable(int stage, int group, int n_groups);

/// Applies backbone_group_trainable to every backbone parameter; throws on unknown stages.
void apply_trainable_stage(const ParamList& params, int stage, int n_groups);

std::size_t count_parameters(const ParamList& params);

}  // namespace hybridct::nn

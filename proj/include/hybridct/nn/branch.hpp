// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include "hybridct/nn/parameter.hpp"
#include "json.hpp"

namespace hybridct::nn {

/// Per-sample outputs of a classifier branch. Logits are raw scores (no softmax).
struct BranchOutput {
  Tensor embedding;   // [N, embedding_dim]
  Tensor logits;      // [N, n_classes]
  Tensor projection;  // [N, projection_dim], un-normalized; empty when the branch has no contrastive head
};

/// Common surface of the 3D and the 2.5D models used by the trainer, the checkpoint code and
/// inference. Model state is mutated by one writer (the trainer) at a time.
class ClassifierBranch {
 public:
  virtual ~ClassifierBranch() = default;

  /// "3d" or "25d".
  virtual std::string kind() const = 0;
  virtual int n_classes() const = 0;
  /// Shape of one model-ready sample (without the batch dimension).
  virtual std::vector<int> sample_shape() const = 0;

  /// `training` caches activations for backward and uses batch statistics.
  virtual BranchOutput forward(const Tensor& batch, bool training) = 0;
  /// Backpropagates dL/dlogits and, when given, dL/dprojection into parameter gradients.
  virtual void backward(const Tensor& d_logits, const Tensor* d_projection) = 0;

  virtual ParamList parameters() = 0;
  virtual BufferList buffers() { return {}; }
  virtual int n_layer_groups() const = 0;
  virtual void set_trainable_stage(int stage) { apply_trainable_stage(parameters(), stage, n_layer_groups()); }
  virtual bool has_projection() const = 0;

  /// Architecture echo stored in checkpoints; make_branch() rebuilds the model from it.
  virtual nlohmann::json arch() const = 0;
};

std::unique_ptr<ClassifierBranch> make_branch(const nlohmann::json& arch, std::uint64_t seed);

}  // namespace hybridct::nn

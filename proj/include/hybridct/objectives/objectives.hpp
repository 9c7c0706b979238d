// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hybridct/core/rng.hpp"
#include "hybridct/core/tensor.hpp"

namespace hybridct::obj {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat to_mat(const Tensor& t);
Tensor to_tensor(const Mat& m);

struct VRExCfg {
  double lambda_vrex = 1.0;
  void validate() const;
};

struct SupConCfg {
  double tau = 0.07;
  /// Coefficient of the contrastive term against cross-entropy.
  double weight = 0.5;
  void validate() const;
};

struct MixUpCfg {
  double alpha = 0.4;
  bool enabled = true;
  void validate() const;
};

/// Mean over the batch of -log softmax(logits)[label]. `grad` receives dL/dlogits.
double cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* grad = nullptr);

/// mean(losses) + lambda * population variance(losses). `grad` receives dL/dlosses.
double vrex_loss(const std::vector<double>& per_domain_ce, double lambda, std::vector<double>* grad = nullptr);

struct VRExTerms {
  double total = 0.0;
  std::vector<int> domains;       // domains present in the batch, ascending
  std::vector<double> domain_ce;  // aligned with `domains`
};

/// Per-domain cross-entropy over the samples of each present domain, combined by vrex_loss.
VRExTerms vrex_objective(const Mat& logits, const std::vector<int>& labels, const std::vector<int>& domains,
                         double lambda, Mat* grad = nullptr);

/// Supervised contrastive loss on internally length-normalized embeddings. Anchors without
/// positives are skipped; the result is the mean over the remaining anchors (0 if none).
double supcon_loss(const Mat& embeddings, const std::vector<int>& labels, double tau, Mat* grad = nullptr);

struct MixUpBatch {
  Tensor mixed;
  std::vector<int> labels_a;
  std::vector<int> labels_b;
  std::vector<int> perm;
  double lam = 1.0;
};

/// lam ~ Beta(alpha, alpha), a random permutation pi, mixed = lam x + (1 - lam) x[pi].
MixUpBatch mixup(const Tensor& inputs, const std::vector<int>& labels, double alpha, Rng& rng);
MixUpBatch mixup_with(const Tensor& inputs, const std::vector<int>& labels, double lam, std::vector<int> perm);

/// lam CE(logits, a) + (1 - lam) CE(logits, b).
double mixed_ce(const Mat& logits, const std::vector<int>& labels_a, const std::vector<int>& labels_b, double lam,
                Mat* grad = nullptr);

struct MixState {
  std::vector<int> labels_a;
  std::vector<int> labels_b;
  double lam = 1.0;
};

struct Stage2Terms {
  double total = 0.0;
  double ce = 0.0;
  double supcon = 0.0;
};

/// CE term (mixed when `mix` is given) + weight * supcon on unmixed `embeddings` with `labels`.
/// `logits` and `embeddings` may have different batch sizes when MixUp is active.
Stage2Terms stage2_total_loss(const Mat& logits, const Mat& embeddings, const std::vector<int>& labels,
                              const SupConCfg& cfg, const MixState* mix, Mat* d_logits = nullptr,
                              Mat* d_embeddings = nullptr);

}  // namespace hybridct::obj

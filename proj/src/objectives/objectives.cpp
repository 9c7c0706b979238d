// SPDX-License-Identifier: Apache-2.0
#include "hybridct/objectives/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::obj {

Mat to_mat(const Tensor& t) {
  HYBRIDCT_REQUIRE(t.rank() == 2, "expected a rank-2 tensor, got " + t.shape_string());
  Mat m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.size(); ++i) m.data()[i] = t[i];
  return m;
}

Tensor to_tensor(const Mat& m) {
  Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(m.data()[i]);
  return t;
}

void VRExCfg::validate() const {
  HYBRIDCT_REQUIRE(std::isfinite(lambda_vrex) && lambda_vrex >= 0, "lambda_vrex must be >= 0");
}

void SupConCfg::validate() const {
  HYBRIDCT_REQUIRE(std::isfinite(tau) && tau > 0, "supcon tau must be > 0");
  HYBRIDCT_REQUIRE(std::isfinite(weight) && weight >= 0, "supcon weight must be >= 0");
}

void MixUpCfg::validate() const { HYBRIDCT_REQUIRE(std::isfinite(alpha) && alpha > 0, "mixup alpha must be > 0"); }

namespace {

void check_labels(const Mat& logits, const std::vector<int>& labels) {
  HYBRIDCT_REQUIRE(static_cast<Eigen::Index>(labels.size()) == logits.rows(),
                   fmt::format("{} labels for {} logit rows", labels.size(), logits.rows()));
  HYBRIDCT_REQUIRE(logits.rows() > 0, "empty batch");
  for (int y : labels)
    HYBRIDCT_REQUIRE(y >= 0 && y < logits.cols(), fmt::format("label {} outside [0, {})", y, logits.cols()));
}

// Row-wise log-softmax.
Mat log_softmax(const Mat& z) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.row(i) = z.row(i).array() - lse;
  }
  return out;
}

}  // namespace

double cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* grad) {
  check_labels(logits, labels);
  const Mat lp = log_softmax(logits);
  const auto B = static_cast<double>(logits.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) loss -= lp(i, labels[i]);
  if (grad) {
    *grad = lp.array().exp() / B;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) (*grad)(i, labels[i]) -= 1.0 / B;
  }
  return loss / B;
}

double vrex_loss(const std::vector<double>& per_domain_ce, double lambda, std::vector<double>* grad) {
  HYBRIDCT_REQUIRE(!per_domain_ce.empty(), "vrex_loss needs at least one domain loss");
  const auto D = static_cast<double>(per_domain_ce.size());
  const double mean = std::accumulate(per_domain_ce.begin(), per_domain_ce.end(), 0.0) / D;
  double var = 0.0;
  for (double l : per_domain_ce) var += (l - mean) * (l - mean);
  var /= D;
  if (grad) {
    grad->resize(per_domain_ce.size());
    for (std::size_t d = 0; d < per_domain_ce.size(); ++d)
      (*grad)[d] = 1.0 / D + lambda * 2.0 * (per_domain_ce[d] - mean) / D;
  }
  return mean + lambda * var;
}

VRExTerms vrex_objective(const Mat& logits, const std::vector<int>& labels, const std::vector<int>& domains,
                         double lambda, Mat* grad) {
  check_labels(logits, labels);
  HYBRIDCT_REQUIRE(domains.size() == labels.size(), "every sample needs a domain id");
  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < domains.size(); ++i) members[domains[i]].push_back(static_cast<Eigen::Index>(i));

  VRExTerms out;
  std::vector<Mat> grads;
  for (const auto& [d, rows] : members) {
    Mat sub(static_cast<Eigen::Index>(rows.size()), logits.cols());
    std::vector<int> sub_labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      sub.row(static_cast<Eigen::Index>(r)) = logits.row(rows[r]);
      sub_labels.push_back(labels[rows[r]]);
    }
    Mat g;
    out.domains.push_back(d);
    out.domain_ce.push_back(cross_entropy(sub, sub_labels, grad ? &g : nullptr));
    grads.push_back(std::move(g));
  }
  std::vector<double> w;
  out.total = vrex_loss(out.domain_ce, lambda, grad ? &w : nullptr);
  if (grad) {
    *grad = Mat::Zero(logits.rows(), logits.cols());
    std::size_t k = 0;
    for (const auto& [d, rows] : members) {
      for (std::size_t r = 0; r < rows.size(); ++r) grad->row(rows[r]) += w[k] * grads[k].row(static_cast<Eigen::Index>(r));
      ++k;
    }
  }
  return out;
}

double supcon_loss(const Mat& embeddings, const std::vector<int>& labels, double tau, Mat* grad) {
  const Eigen::Index B = embeddings.rows();
  HYBRIDCT_REQUIRE(embeddings.cols() > 0, "supcon needs non-empty embeddings");
  HYBRIDCT_REQUIRE(static_cast<Eigen::Index>(labels.size()) == B, "supcon: one label per embedding");
  HYBRIDCT_REQUIRE(embeddings.allFinite(), "supcon: non-finite embeddings");
  HYBRIDCT_REQUIRE(tau > 0, "supcon tau must be > 0");
  if (grad) *grad = Mat::Zero(B, embeddings.cols());
  if (B < 2) return 0.0;

  Eigen::VectorXd norms = embeddings.rowwise().norm().cwiseMax(1e-12);
  const Mat z = norms.cwiseInverse().asDiagonal() * embeddings;
  const Mat s = z * z.transpose() / tau;

  Mat g_s = Mat::Zero(B, B);  // dL/ds
  int anchors = 0;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    int n_pos = 0;
    for (Eigen::Index p = 0; p < B; ++p) n_pos += (p != i && labels[p] == labels[i]);
    if (n_pos == 0) continue;
    ++anchors;
    double m = -INFINITY;
    for (Eigen::Index a = 0; a < B; ++a)
      if (a != i) m = std::max(m, s(i, a));
    double denom = 0.0;
    for (Eigen::Index a = 0; a < B; ++a)
      if (a != i) denom += std::exp(s(i, a) - m);
    const double lse = m + std::log(denom);
    double li = lse;
    for (Eigen::Index p = 0; p < B; ++p)
      if (p != i && labels[p] == labels[i]) li -= s(i, p) / n_pos;
    loss += li;
    for (Eigen::Index a = 0; a < B; ++a) {
      if (a == i) continue;
      g_s(i, a) = std::exp(s(i, a) - lse) - (labels[a] == labels[i] ? 1.0 / n_pos : 0.0);
    }
  }
  if (anchors == 0) return 0.0;
  loss /= anchors;
  if (grad) {
    g_s /= anchors;
    const Mat dz = (g_s + g_s.transpose()) * z / tau;
    for (Eigen::Index i = 0; i < B; ++i) {
      const double proj = z.row(i).dot(dz.row(i));
      grad->row(i) = (dz.row(i) - proj * z.row(i)) / norms(i);
    }
  }
  return loss;
}

MixUpBatch mixup_with(const Tensor& inputs, const std::vector<int>& labels, double lam, std::vector<int> perm) {
  const int B = inputs.dim(0);
  HYBRIDCT_REQUIRE(B >= 2, "mixup needs a batch of at least 2");
  HYBRIDCT_REQUIRE(static_cast<int>(labels.size()) == B && static_cast<int>(perm.size()) == B,
                   "mixup: labels and permutation must match the batch");
  HYBRIDCT_REQUIRE(lam >= 0 && lam <= 1, "mixup lam must be in [0, 1]");
  MixUpBatch out;
  out.mixed = Tensor(inputs.shape());
  const std::size_t row = inputs.row_size();
  const auto l = static_cast<float>(lam);
  const auto r = static_cast<float>(1.0 - lam);
  for (int i = 0; i < B; ++i) {
    const float* a = inputs.data() + i * row;
    const float* b = inputs.data() + static_cast<std::size_t>(perm[i]) * row;
    float* dst = out.mixed.data() + i * row;
    if (lam == 1.0)
      std::copy_n(a, row, dst);
    else
      for (std::size_t j = 0; j < row; ++j) dst[j] = l * a[j] + r * b[j];
    out.labels_b.push_back(labels[perm[i]]);
  }
  out.labels_a = labels;
  out.perm = std::move(perm);
  out.lam = lam;
  return out;
}

MixUpBatch mixup(const Tensor& inputs, const std::vector<int>& labels, double alpha, Rng& rng) {
  HYBRIDCT_REQUIRE(alpha > 0, "mixup alpha must be > 0");
  const double lam = sample_beta(alpha, alpha, rng);
  std::vector<int> perm(inputs.dim(0));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return mixup_with(inputs, labels, lam, std::move(perm));
}

double mixed_ce(const Mat& logits, const std::vector<int>& labels_a, const std::vector<int>& labels_b, double lam,
                Mat* grad) {
  HYBRIDCT_REQUIRE(lam >= 0 && lam <= 1, fmt::format("mixed_ce: lam {} outside [0, 1]", lam));
  Mat ga, gb;
  const double la = cross_entropy(logits, labels_a, grad ? &ga : nullptr);
  const double lb = cross_entropy(logits, labels_b, grad ? &gb : nullptr);
  if (grad) *grad = lam * ga + (1.0 - lam) * gb;
  return lam * la + (1.0 - lam) * lb;
}

Stage2Terms stage2_total_loss(const Mat& logits, const Mat& embeddings, const std::vector<int>& labels,
                              const SupConCfg& cfg, const MixState* mix, Mat* d_logits, Mat* d_embeddings) {
  cfg.validate();
  Stage2Terms out;
  if (mix)
    out.ce = mixed_ce(logits, mix->labels_a, mix->labels_b, mix->lam, d_logits);
  else
    out.ce = cross_entropy(logits, labels, d_logits);
  if (cfg.weight > 0) {
    out.supcon = supcon_loss(embeddings, labels, cfg.tau, d_embeddings);
    if (d_embeddings) *d_embeddings *= cfg.weight;
  } else if (d_embeddings) {
    *d_embeddings = Mat::Zero(embeddings.rows(), embeddings.cols());
  }
  out.total = out.ce + cfg.weight * out.supcon;
  return out;
}

}  // namespace hybridct::obj

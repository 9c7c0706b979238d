// SPDX-License-Identifier: Apache-2.0
// Randomized property sweeps over the evaluation code.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hybridct/core/rng.hpp"
#include "hybridct/eval/eval.hpp"
#include "oracles.hpp"

namespace hybridct::checks {

struct Sweep {
  int instances = 0;
  int failures = 0;
  double max_error = 0.0;
  std::string first_failure;
};

// macro_f1 and grouped_macro_f1 against the confusion-matrix oracle; B <= 20, C <= 5.
inline Sweep metric_oracle(int instances, std::uint64_t seed, double tol = 1e-12) {
  Rng rng(seed);
  Sweep s;
  s.instances = instances;
  for (int t = 0; t < instances; ++t) {
    const int B = std::uniform_int_distribution<int>(1, 20)(rng);
    const int C = std::uniform_int_distribution<int>(2, 5)(rng);
    const int G = std::uniform_int_distribution<int>(1, 4)(rng);
    std::uniform_int_distribution<int> cls(0, C - 1), grp(0, G - 1);
    std::vector<int> p(B), y(B);
    std::vector<std::string> g(B);
    for (int i = 0; i < B; ++i) {
      p[i] = cls(rng);
      // Bias toward agreement so high-F1 regimes are covered too.
      y[i] = std::uniform_real_distribution<double>(0, 1)(rng) < 0.5 ? p[i] : cls(rng);
      g[i] = "g" + std::to_string(grp(rng));
    }
    double err = std::abs(eval::macro_f1(p, y, C) - oracle::macro_f1(p, y, C));
    const auto got = eval::grouped_macro_f1(p, y, g, C);
    const auto want = oracle::grouped_macro_f1(p, y, g, C);
    double mean = 0.0;
    if (got.per_group.size() != want.size()) err = 1.0;
    for (const auto& [k, v] : want) {
      mean += v;
      const auto it = got.per_group.find(k);
      err = std::max(err, it == got.per_group.end() ? 1.0 : std::abs(it->second - v));
    }
    err = std::max(err, std::abs(got.group_mean - mean / want.size()));
    s.max_error = std::max(s.max_error, err);
    if (err > tol && s.failures++ == 0) s.first_failure = "instance " + std::to_string(t);
  }
  return s;
}

inline eval::LogitTable random_table(int n, int C, Rng& rng, const std::string& tag) {
  std::vector<std::string> names;
  for (int c = 0; c < C; ++c) names.push_back("c" + std::to_string(c));
  eval::LogitTable t(names, tag);
  std::normal_distribution<double> z(0.0, 3.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(C);
    for (double& v : row) v = z(rng);
    t.add("scan_" + std::to_string(i), row);
  }
  return t;
}

// Endpoint identities (w = 1 gives a, w = 0 gives b) and argmax invariance under a per-row
// constant added to both inputs, in logit space and probability space.
inline Sweep ensemble_invariants(int instances, std::uint64_t seed) {
  Rng rng(seed);
  Sweep s;
  s.instances = instances;
  for (int t = 0; t < instances; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    const int C = std::uniform_int_distribution<int>(2, 5)(rng);
    const auto a = random_table(n, C, rng, "a");
    const auto b = random_table(n, C, rng, "b");
    const double w = std::uniform_real_distribution<double>(0, 1)(rng);
    bool ok = true;
    double err = 0.0;

    const auto e1 = eval::ensemble(a, b, 1.0), e0 = eval::ensemble(a, b, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (int c = 0; c < C; ++c) {
        err = std::max(err, std::abs(e1.scores_at(i)[c] - a.scores_at(i)[c]));
        err = std::max(err, std::abs(e0.scores_at(i)[c] - b.scores_at(i)[c]));
      }
    ok &= err == 0.0;
    ok &= eval::predict_labels(eval::ensemble(a, b, 1.0, eval::FusionSpace::probabilities)) == eval::predict_labels(a);
    ok &= eval::predict_labels(eval::ensemble(a, b, 0.0, eval::FusionSpace::probabilities)) == eval::predict_labels(b);

    eval::LogitTable as(a.class_names(), "a"), bs(b.class_names(), "b");
    std::normal_distribution<double> shift(0.0, 20.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double ca = shift(rng), cb = shift(rng);
      auto ra = a.scores_at(i), rb = b.scores_at(i);
      for (double& v : ra) v += ca;
      for (double& v : rb) v += cb;
      as.add(a.ids()[i], ra);
      bs.add(b.ids()[i], rb);
    }
    // A shared constant moves every class equally; separate constants per table only shift in
    // probability space, where softmax absorbs them.
    eval::LogitTable as2(a.class_names(), "a"), bs2(b.class_names(), "b");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double c = shift(rng);
      auto ra = a.scores_at(i), rb = b.scores_at(i);
      for (double& v : ra) v += c;
      for (double& v : rb) v += c;
      as2.add(a.ids()[i], ra);
      bs2.add(b.ids()[i], rb);
    }
    ok &= eval::predict_labels(eval::ensemble(as2, bs2, w)) == eval::predict_labels(eval::ensemble(a, b, w));
    const auto sp = eval::FusionSpace::probabilities;
    ok &= eval::predict_labels(eval::ensemble(as, bs, w, sp)) == eval::predict_labels(eval::ensemble(a, b, w, sp));
    s.max_error = std::max(s.max_error, err);
    if (!ok && s.failures++ == 0) s.first_failure = "instance " + std::to_string(t);
  }
  return s;
}

}  // namespace hybridct::checks

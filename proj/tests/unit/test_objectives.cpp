// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gradcheck.hpp"
#include "hybridct/core/error.hpp"

using namespace hybridct;
using namespace hybridct::obj;
using gradcheck::random_labels;
using gradcheck::random_mat;

namespace {

Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

double softmax_nll(const std::vector<double>& z, int y) {
  double s = 0.0;
  for (double v : z) s += std::exp(v);
  return -std::log(std::exp(z[y]) / s);
}

// Every anchor-positive term enumerated explicitly.
double supcon_oracle(const Mat& e, const std::vector<int>& y, double tau) {
  const int B = static_cast<int>(e.rows());
  std::vector<std::vector<double>> u(B);
  for (int i = 0; i < B; ++i) {
    double n = 0.0;
    for (int k = 0; k < e.cols(); ++k) n += e(i, k) * e(i, k);
    for (int k = 0; k < e.cols(); ++k) u[i].push_back(e(i, k) / std::sqrt(n));
  }
  auto dot = [&](int i, int j) {
    double s = 0.0;
    for (std::size_t k = 0; k < u[i].size(); ++k) s += u[i][k] * u[j][k];
    return s;
  };
  double total = 0.0;
  int anchors = 0;
  for (int i = 0; i < B; ++i) {
    double denom = 0.0;
    int npos = 0;
    for (int a = 0; a < B; ++a)
      if (a != i) {
        denom += std::exp(dot(i, a) / tau);
        npos += y[a] == y[i];
      }
    if (npos == 0) continue;
    double li = 0.0;
    for (int p = 0; p < B; ++p)
      if (p != i && y[p] == y[i]) li -= std::log(std::exp(dot(i, p) / tau) / denom);
    total += li / npos;
    ++anchors;
  }
  return anchors ? total / anchors : 0.0;
}

}  // namespace

TEST_CASE("cross entropy reference values") {
  CHECK(cross_entropy(Mat::Constant(3, 4, 0.7), {0, 1, 3}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  Mat big = Mat::Zero(2, 3);
  big(0, 1) = 50.0;
  big(1, 2) = 50.0;
  CHECK(cross_entropy(big, {1, 2}) < 1e-20);
  const double want = 0.5 * (softmax_nll({1, 0}, 0) + softmax_nll({0, 2}, 1));
  CHECK(cross_entropy(mat({{1, 0}, {0, 2}}), {0, 1}) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("cross entropy is shift invariant") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Mat z = random_mat(5, 3, rng, 3.0);
    const auto y = random_labels(5, 3, rng);
    const double c = std::uniform_real_distribution<double>(-50, 50)(rng);
    CHECK(std::abs(cross_entropy(z.array() + c, y) - cross_entropy(z, y)) <= 1e-8);
  }
}

TEST_CASE("vrex values and mean lower bound") {
  CHECK(vrex_loss({0.6, 0.6}, 1.0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(vrex_loss({0.5, 0.7}, 1.0) == doctest::Approx(0.61).epsilon(1e-12));
  CHECK(vrex_loss({0.2, 0.9, 1.3}, 0.0) == (0.2 + 0.9 + 1.3) / 3.0);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> l{u(rng), u(rng), u(rng)};
    const double mean = (l[0] + l[1] + l[2]) / 3;
    CHECK(vrex_loss(l, u(rng)) >= mean - 1e-15);
    CHECK(vrex_loss(l, 1.0) > mean);
  }
}

TEST_CASE("vrex objective skips absent domains") {
  const Mat z = mat({{2, 0}, {0, 1}, {1, 1}, {0, 3}});
  const std::vector<int> y{0, 1, 0, 1};
  const auto t = vrex_objective(z, y, {3, 3, 7, 7}, 1.0);
  CHECK(t.domains == std::vector<int>{3, 7});
  const double d3 = cross_entropy(z.topRows(2), {0, 1});
  const double d7 = cross_entropy(z.bottomRows(2), {0, 1});
  CHECK(t.domain_ce[0] == doctest::Approx(d3));
  CHECK(t.total == doctest::Approx(vrex_loss({d3, d7}, 1.0)).epsilon(1e-12));
}

TEST_CASE("supcon degenerate cases and the enumeration oracle") {
  Rng rng(3);
  CHECK(supcon_loss(random_mat(4, 3, rng), {0, 1, 2, 3}, 0.07) == 0.0);
  CHECK(std::abs(supcon_loss(random_mat(2, 3, rng), {5, 5}, 0.07)) <= 1e-12);

  const double s = std::numbers::sqrt2 / 2;
  const Mat e = mat({{1, 0}, {0, 1}, {-1, 0}, {s, s}});
  const std::vector<int> y{0, 0, 1, 1};
  CHECK(supcon_loss(e, y, 0.07) == doctest::Approx(supcon_oracle(e, y, 0.07)).epsilon(1e-10));

  for (int t = 0; t < 20; ++t) {
    const Mat r = random_mat(7, 5, rng);
    const auto yy = random_labels(7, 3, rng);
    CHECK(supcon_loss(r, yy, 0.2) == doctest::Approx(supcon_oracle(r, yy, 0.2)).epsilon(1e-10));
  }
}

TEST_CASE("supcon is invariant to a shared rotation") {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const Mat e = random_mat(6, 4, rng);
    const auto y = random_labels(6, 2, rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd(random_mat(4, 4, rng))).householderQ();
    const Mat rotated = e * q;
    CHECK(std::abs(supcon_loss(rotated, y, 0.07) - supcon_loss(e, y, 0.07)) <= 1e-6);
  }
}

TEST_CASE("mixup endpoints, midpoint and the Beta sampler mean") {
  Tensor x({2, 3});
  for (int i = 0; i < 6; ++i) x[i] = static_cast<float>(i);
  const auto one = mixup_with(x, {0, 1}, 1.0, {1, 0});
  for (int i = 0; i < 6; ++i) CHECK(one.mixed[i] == x[i]);
  const auto half = mixup_with(x, {0, 1}, 0.5, {1, 0});
  for (int c = 0; c < 3; ++c) {
    CHECK(half.mixed[c] == doctest::Approx(0.5 * (x[c] + x[3 + c])));
    CHECK(half.mixed[3 + c] == doctest::Approx(0.5 * (x[c] + x[3 + c])));
  }
  CHECK(half.labels_a == std::vector<int>{0, 1});
  CHECK(half.labels_b == std::vector<int>{1, 0});

  Rng rng(5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += sample_beta(0.4, 0.4, rng);
  CHECK(std::abs(sum / n - 0.5) <= 0.01);
  const auto m = mixup(x, {0, 1}, 0.4, rng);
  CHECK(m.lam >= 0.0);
  CHECK(m.lam <= 1.0);
}

TEST_CASE("mixed cross entropy endpoints and affinity in lambda") {
  Rng rng(6);
  const Mat z = random_mat(4, 3, rng, 0.5);
  const std::vector<int> a{0, 1, 2, 0}, b{2, 2, 1, 1};
  CHECK(mixed_ce(z, a, b, 1.0) == doctest::Approx(cross_entropy(z, a)).epsilon(1e-14));
  CHECK(mixed_ce(z, a, b, 0.0) == doctest::Approx(cross_entropy(z, b)).epsilon(1e-14));
  CHECK(mixed_ce(z, a, b, 0.3) == doctest::Approx(0.3 * cross_entropy(z, a) + 0.7 * cross_entropy(z, b)).epsilon(1e-14));
  const double f1 = mixed_ce(z, a, b, 0.2), f2 = mixed_ce(z, a, b, 0.5), f3 = mixed_ce(z, a, b, 0.8);
  CHECK(f2 == doctest::Approx(0.5 * (f1 + f3)).epsilon(1e-12));
}

TEST_CASE("stage-2 total composes its terms") {
  Rng rng(7);
  const Mat z = random_mat(6, 2, rng);
  const Mat e = random_mat(6, 4, rng);
  const auto y = random_labels(6, 2, rng);
  SupConCfg off;
  off.weight = 0.0;
  CHECK(stage2_total_loss(z, e, y, off, nullptr).total == doctest::Approx(cross_entropy(z, y)).epsilon(1e-14));

  SupConCfg on;
  on.weight = 1.0;
  const auto t = stage2_total_loss(z, e, y, on, nullptr);
  CHECK(t.total == doctest::Approx(t.ce + t.supcon).epsilon(1e-14));
  CHECK(t.supcon == doctest::Approx(supcon_loss(e, y, on.tau)).epsilon(1e-12));

  MixState endpoint{y, random_labels(6, 2, rng), 1.0};
  CHECK(stage2_total_loss(z, e, y, on, &endpoint).total == doctest::Approx(t.total).epsilon(1e-14));

  MixState mix{random_labels(12, 2, rng), random_labels(12, 2, rng), 0.3};
  const Mat zz = random_mat(12, 2, rng);
  const auto m = stage2_total_loss(zz, e, y, on, &mix);
  CHECK(m.ce == doctest::Approx(mixed_ce(zz, mix.labels_a, mix.labels_b, 0.3)).epsilon(1e-14));
}

TEST_CASE("analytic gradients match central differences") {
  for (const auto& r : gradcheck::check_all(8, 100)) {
    INFO(r.name << " max relative error " << r.max_rel_error);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("objective config validation") {
  CHECK_THROWS_AS((VRExCfg{-1.0}).validate(), ValidationError);
  CHECK_THROWS_AS((SupConCfg{0.0, 0.5}).validate(), ValidationError);
  CHECK_THROWS_AS((MixUpCfg{-0.1, true}).validate(), ValidationError);
  CHECK_THROWS_AS(cross_entropy(Mat::Zero(2, 2), {0, 2}), ValidationError);
}

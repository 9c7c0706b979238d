// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "eval_checks.hpp"
#include "hybridct/core/error.hpp"
#include "hybridct/eval/report.hpp"
#include "paper_fixtures.hpp"

using namespace hybridct;
using namespace hybridct::eval;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hybridct_eval_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("macro F1 hand values") {
  CHECK(macro_f1({0, 1, 1, 0}, {0, 1, 1, 0}, 2) == 1.0);
  // Class 0: P 1, R 0.5, F1 2/3; class 1: P 2/3, R 1, F1 0.8.
  CHECK(macro_f1({0, 1, 1, 1}, {0, 0, 1, 1}, 2) == doctest::Approx((2.0 / 3 + 0.8) / 2).epsilon(1e-15));
  // An absent class contributes 0.
  CHECK(macro_f1({0, 0}, {0, 0}, 3) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const auto cm = confusion_matrix({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
  CHECK(cm == std::vector<std::vector<long>>{{1, 1}, {0, 2}});
  const auto cs = class_stats({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
  CHECK(cs[0].support == 2);
  CHECK(cs[1].precision == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(macro_f1({0, 3}, {0, 1}, 2), ValidationError);
  CHECK_THROWS_AS(macro_f1({0}, {0, 1}, 2), ValidationError);
}

TEST_CASE("metrics match the confusion-matrix oracle") {
  const auto s = checks::metric_oracle(300, 17);
  INFO(s.first_failure << " max error " << s.max_error);
  CHECK(s.failures == 0);
}

TEST_CASE("grouped F1 and the fairness gap") {
  const std::vector<int> p{0, 1, 0, 1, 1, 1}, y{0, 1, 1, 1, 0, 1};
  const std::vector<std::string> g{"female", "female", "female", "male", "male", "male"};
  const auto r = grouped_macro_f1(p, y, g, 2);
  const double f = macro_f1({0, 1, 0}, {0, 1, 1}, 2), m = macro_f1({1, 1, 1}, {1, 0, 1}, 2);
  CHECK(r.per_group.at("female") == doctest::Approx(f).epsilon(1e-15));
  CHECK(r.per_group.at("male") == doctest::Approx(m).epsilon(1e-15));
  CHECK(r.group_mean == doctest::Approx((f + m) / 2).epsilon(1e-15));
  CHECK(fairness_gap(r.per_group) == doctest::Approx(std::abs(f - m)));
}

TEST_CASE("natural ordering of group keys") {
  CHECK(natural_sorted({"10", "2", "1"}) == std::vector<std::string>{"1", "2", "10"});
  CHECK(natural_sorted({"H10", "H2"}) == std::vector<std::string>{"H2", "H10"});
  CHECK(natural_less("a", "b"));
}

TEST_CASE("default class names") {
  CHECK(default_class_names(2) == std::vector<std::string>{"non-COVID", "COVID"});
  CHECK(default_class_names(4) == std::vector<std::string>{"Normal", "COVID", "A", "G"});
  CHECK(default_class_names(3) == std::vector<std::string>{"class_0", "class_1", "class_2"});
}

TEST_CASE("logit tables round-trip through CSV") {
  Rng rng(1);
  const auto t = checks::random_table(9, 3, rng, "tag");
  const auto dir = scratch("csv");
  write_logits_csv(dir / "l.csv", t);
  const auto back = read_logits_csv(dir / "l.csv");
  CHECK(back.class_names() == t.class_names());
  CHECK(back.ids() == t.ids());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(back.scores_at(i) == t.scores_at(i));

  std::ofstream(dir / "bad.csv") << "scan_id,a,b\nx,1\n";
  CHECK_THROWS(read_logits_csv(dir / "bad.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("ensemble arithmetic, order and mismatches") {
  LogitTable a({"x", "y"}), b({"x", "y"});
  a.add("s1", {1.0, 0.0});
  a.add("s2", {0.0, 4.0});
  b.add("s2", {2.0, 0.0});
  b.add("s1", {3.0, 1.0});
  const auto e = ensemble(a, b, 0.25);
  CHECK(e.ids() == std::vector<std::string>{"s1", "s2"});
  CHECK(e.scores("s1")[0] == doctest::Approx(0.25 * 1 + 0.75 * 3));
  CHECK(e.scores("s2")[1] == doctest::Approx(0.25 * 4));
  CHECK(predict_labels(e) == std::vector<std::pair<std::string, int>>{{"s1", 0}, {"s2", 0}});
  CHECK(argmax({1.0, 1.0, 0.5}) == 0);

  LogitTable c({"x", "y"});
  c.add("s1", {0.0, 0.0});
  CHECK_THROWS_AS(ensemble(a, c, 0.5), ValidationError);
  CHECK_THROWS_AS(ensemble(a, b, 1.5), ValidationError);
}

TEST_CASE("ensemble invariants on random tables") {
  const auto s = checks::ensemble_invariants(200, 23);
  INFO(s.first_failure);
  CHECK(s.failures == 0);
}

TEST_CASE("metrics reports round-trip through JSON") {
  const std::vector<int> p{0, 1, 1, 0, 1}, y{0, 1, 0, 0, 1};
  const std::vector<std::string> g{"0", "0", "1", "1", "1"};
  const auto m = compute_metrics(p, y, g, {"non-COVID", "COVID"}, "source", "3D");
  CHECK(m.n_samples == 5);
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.overall_macro_f1 == doctest::Approx(macro_f1(p, y, 2)));
  const auto back = MetricsReport::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
}

TEST_CASE("published tables render byte-identically to the golden files") {
  for (const auto& c : fixtures::render_all()) {
    INFO(c.name << "\n" << c.rendered);
    CHECK(c.rendered == fixtures::golden(c.name));
  }
}

TEST_CASE("layouts reject reports without the needed groups") {
  auto m = fixtures::per_source_3d();
  CHECK_THROWS_AS(render_report(m, Layout::task2_gender), ValidationError);
  m.per_class.clear();
  CHECK_THROWS_AS(render_report(m, Layout::task2_per_class), ValidationError);
  CHECK_THROWS_AS(parse_layout("nope"), ValidationError);
}

TEST_CASE("svg plots are self-contained documents") {
  const auto line = svg_line_plot({{"run", {{0, 1.0}, {1, 0.5}, {2, 0.25}}}}, "Loss", "step", "loss");
  CHECK(line.rfind("<svg", 0) == 0);
  CHECK(line.find("</svg>") != std::string::npos);
  CHECK(line.find("<polyline") != std::string::npos);
  const auto bars = svg_bar_chart({{"H1", 0.9}, {"H2", 0.7}}, "F1");
  CHECK(bars.find("H2") != std::string::npos);
}

// SPDX-License-Identifier: Apache-2.0
#include "hybridct/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::eval {

Layout parse_layout(const std::string& s) {
  if (s == "task1_per_source" || s == "source") return Layout::task1_per_source;
  if (s == "task2_per_class" || s == "class") return Layout::task2_per_class;
  if (s == "task2_gender" || s == "gender") return Layout::task2_gender;
  throw ValidationError("unknown report layout '" + s + "'");
}

ComparisonLayout parse_comparison_layout(const std::string& s) {
  if (s == "model_summary") return ComparisonLayout::model_summary;
  if (s == "source_comparison") return ComparisonLayout::source_comparison;
  if (s == "class_comparison") return ComparisonLayout::class_comparison;
  if (s == "test_hospitals") return ComparisonLayout::test_hospitals;
  if (s == "test_gender") return ComparisonLayout::test_gender;
  throw ValidationError("unknown comparison layout '" + s + "'");
}

namespace {

std::string row(const std::vector<std::string>& cells) { return "| " + fmt::format("{}", fmt::join(cells, " | ")) + " |\n"; }

std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& body) {
  std::string out = row(header);
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? "---|" : ":---:|";
  out += "\n";
  for (const auto& r : body) out += row(r);
  return out;
}

std::string f4(double v) { return fmt::format("{:.4f}", v); }
std::string f3(double v) { return fmt::format("{:.3f}", v); }

std::vector<std::string> groups_of(const MetricsReport& m, const std::string& kind) {
  if (m.group_by != kind || m.per_group.empty())
    throw ValidationError(fmt::format("layout needs per-{} groups; report '{}' is grouped by '{}'", kind, m.model_tag,
                                      m.group_by.empty() ? "nothing" : m.group_by));
  std::vector<std::string> keys;
  for (const auto& [k, v] : m.per_group) keys.push_back(k);
  return natural_sorted(keys);
}

std::string hospital_label(const std::string& key) {
  if (!key.empty() && std::all_of(key.begin(), key.end(), ::isdigit)) return "H" + std::to_string(std::stoi(key) + 1);
  return key;
}

void require_gender(const MetricsReport& m) {
  groups_of(m, "gender");
  if (!m.per_group.count("female") || !m.per_group.count("male"))
    throw ValidationError("gender layout needs female and male groups in report '" + m.model_tag + "'");
}

}  // namespace

std::string render_report(const MetricsReport& m, Layout layout) {
  switch (layout) {
    case Layout::task1_per_source: {
      const auto keys = groups_of(m, "source");
      std::vector<std::string> header{"Source"}, values{"F1-score"};
      for (const auto& k : keys) {
        header.push_back("Source " + k);
        values.push_back(f4(m.per_group.at(k)));
      }
      return table(header, {values});
    }
    case Layout::task2_per_class: {
      if (m.per_class.size() != m.class_names.size())
        throw ValidationError("report '" + m.model_tag + "' has no per-class statistics for every class");
      std::vector<std::vector<std::string>> body;
      for (std::size_t c = 0; c < m.per_class.size(); ++c)
        body.push_back({m.class_names[c], f4(m.per_class[c].precision), f4(m.per_class[c].recall), f4(m.per_class[c].f1)});
      return table({"Class", "Precision", "Recall", "F1-score"}, body);
    }
    case Layout::task2_gender: {
      require_gender(m);
      return table({"Gender", "Female", "Male", "Gap"},
                   {{"F1-score", f4(m.per_group.at("female")), f4(m.per_group.at("male")), f4(fairness_gap(m.per_group))}});
    }
  }
  throw ValidationError("unknown layout");
}

std::string render_comparison(const std::vector<MetricsReport>& rows, ComparisonLayout layout) {
  HYBRIDCT_REQUIRE(!rows.empty(), "comparison needs at least one report");
  std::vector<std::vector<std::string>> body;
  switch (layout) {
    case ComparisonLayout::model_summary:
      for (const auto& m : rows) body.push_back({m.model_tag, f4(m.accuracy), f4(m.group_mean_macro_f1)});
      return table({"Model", "Accuracy", "Macro F1"}, body);
    case ComparisonLayout::source_comparison: {
      const auto keys = groups_of(rows.front(), "source");
      std::vector<std::string> header{"Model"};
      for (const auto& k : keys) header.push_back("Source " + k);
      for (const auto& m : rows) {
        if (groups_of(m, "source") != keys) throw ValidationError("reports disagree on the source groups");
        std::vector<std::string> r{m.model_tag};
        for (const auto& k : keys) r.push_back(f4(m.per_group.at(k)));
        body.push_back(r);
      }
      return table(header, body);
    }
    case ComparisonLayout::class_comparison: {
      const auto& classes = rows.front().class_names;
      std::vector<std::string> header{"Class"};
      for (const auto& m : rows) {
        if (m.class_names != classes || m.per_class.size() != classes.size())
          throw ValidationError("reports disagree on the class list");
        header.push_back(m.model_tag);
      }
      for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<std::string> r{classes[c]};
        for (const auto& m : rows) r.push_back(f4(m.per_class[c].f1));
        body.push_back(r);
      }
      return table(header, body);
    }
    case ComparisonLayout::test_hospitals: {
      const auto keys = groups_of(rows.front(), "source");
      std::vector<std::string> header{"Method", "Avg"};
      for (const auto& k : keys) header.push_back(hospital_label(k));
      for (const auto& m : rows) {
        if (groups_of(m, "source") != keys) throw ValidationError("reports disagree on the source groups");
        std::vector<std::string> r{m.model_tag, f3(m.group_mean_macro_f1)};
        for (const auto& k : keys) r.push_back(f3(m.per_group.at(k)));
        body.push_back(r);
      }
      return table(header, body);
    }
    case ComparisonLayout::test_gender:
      for (const auto& m : rows) {
        require_gender(m);
        body.push_back({m.model_tag, f3(m.group_mean_macro_f1), f3(m.per_group.at("female")), f3(m.per_group.at("male"))});
      }
      return table({"Method", "Avg", "Female", "Male"}, body);
  }
  throw ValidationError("unknown comparison layout");
}

namespace {

constexpr double kW = 640, kH = 400, kL = 70, kR = 20, kT = 40, kB = 60;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string svg_open(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n"
      "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n"
      "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
      kW, kH, kW / 2, escape(title), kL, kH - kB, kW - kR, kH - kB, kL, kT, kL, kH - kB);
}

}  // namespace

std::string svg_line_plot(const std::map<std::string, std::vector<std::pair<double, double>>>& series,
                          const std::string& title, const std::string& x_label, const std::string& y_label) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& [name, pts] : series)
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
  auto py = [&](double y) { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); };

  std::string out = svg_open(title);
  for (int t = 0; t <= 4; ++t) {
    const double yv = y0 + (y1 - y0) * t / 4.0;
    const double xv = x0 + (x1 - x0) * t / 4.0;
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kL - 6, py(yv) + 4, yv);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n", px(xv), kH - kB + 18, xv);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (kW + kL) / 2, kH - 15, escape(x_label));
  out += fmt::format("<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
                     (kH - kB + kT) / 2, (kH - kB + kT) / 2, escape(y_label));
  int k = 0;
  for (const auto& [name, pts] : series) {
    const char* color = kColors[k % 6];
    std::string path;
    for (const auto& [x, y] : pts)
      if (std::isfinite(x) && std::isfinite(y)) path += fmt::format("{:.1f},{:.1f} ", px(x), py(y));
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, path);
    out += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", kW - kR - 150, kT + 14 * (k + 1), color, escape(name));
    ++k;
  }
  return out + "</svg>\n";
}

std::string svg_bar_chart(const std::vector<std::pair<std::string, double>>& bars, const std::string& title) {
  std::string out = svg_open(title);
  const double slot = (kW - kL - kR) / std::max<std::size_t>(1, bars.size());
  for (int t = 0; t <= 4; ++t) {
    const double yv = t / 4.0;
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", kL - 6,
                       kH - kB - yv * (kH - kT - kB) + 4, yv);
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double v = std::clamp(bars[i].second, 0.0, 1.0);
    const double h = v * (kH - kT - kB);
    const double x = kL + i * slot + slot * 0.15;
    out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n", x,
                       kH - kB - h, slot * 0.7, h, kColors[i % 6]);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.4f}</text>\n", x + slot * 0.35,
                       kH - kB - h - 4, bars[i].second);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", x + slot * 0.35, kH - kB + 18,
                       escape(bars[i].first));
  }
  return out + "</svg>\n";
}

}  // namespace hybridct::eval

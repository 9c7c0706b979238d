// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "hybridct/eval/eval.hpp"

namespace hybridct::eval {

/// Single-model layouts.
enum class Layout {
  task1_per_source,  // Source | Source 0 ... ; one F1 row
  task2_per_class,   // Class | Precision | Recall | F1-score
  task2_gender,      // Gender | Female | Male | Gap
};

/// Multi-model layouts; one row (or column) per report, labelled by model_tag.
enum class ComparisonLayout {
  model_summary,      // Model | Accuracy | Macro F1
  source_comparison,  // Model | Source 0 ...
  class_comparison,   // Class | <model> ...
  test_hospitals,     // Method | Avg | H1 ...
  test_gender,        // Method | Avg | Female | Male
};

Layout parse_layout(const std::string& s);
ComparisonLayout parse_comparison_layout(const std::string& s);

/// Markdown pipe table. Throws ValidationError when the report lacks the groups the layout needs.
std::string render_report(const MetricsReport& metrics, Layout layout);
std::string render_comparison(const std::vector<MetricsReport>& rows, ComparisonLayout layout);

/// Minimal standalone SVG charts.
std::string svg_line_plot(const std::map<std::string, std::vector<std::pair<double, double>>>& series,
                          const std::string& title, const std::string& x_label, const std::string& y_label);
std::string svg_bar_chart(const std::vector<std::pair<std::string, double>>& bars, const std::string& title);

}  // namespace hybridct::eval

// SPDX-License-Identifier: Apache-2.0
#include "hybridct/eval/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::eval {

std::vector<std::string> default_class_names(int n_classes) {
  if (n_classes == 2) return {"non-COVID", "COVID"};
  if (n_classes == 4) return {"Normal", "COVID", "A", "G"};
  std::vector<std::string> out;
  for (int c = 0; c < n_classes; ++c) out.push_back("class_" + std::to_string(c));
  return out;
}

LogitTable::LogitTable(std::vector<std::string> class_names, std::string model_tag)
    : class_names_(std::move(class_names)), model_tag_(std::move(model_tag)) {
  HYBRIDCT_REQUIRE(!class_names_.empty(), "a logit table needs at least one class");
}

void LogitTable::add(const std::string& scan_id, std::vector<double> scores) {
  HYBRIDCT_REQUIRE(static_cast<int>(scores.size()) == n_classes(),
                   fmt::format("scan {}: {} scores for {} classes", scan_id, scores.size(), n_classes()));
  for (double v : scores) HYBRIDCT_REQUIRE(std::isfinite(v), "scan " + scan_id + ": non-finite logit");
  HYBRIDCT_REQUIRE(!contains(scan_id), "duplicate scan id " + scan_id);
  index_.emplace(scan_id, ids_.size());
  ids_.push_back(scan_id);
  rows_.push_back(std::move(scores));
}

const std::vector<double>& LogitTable::scores(const std::string& scan_id) const {
  const auto it = index_.find(scan_id);
  HYBRIDCT_REQUIRE(it != index_.end(), "unknown scan id " + scan_id);
  return rows_[it->second];
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_logits_csv(const std::filesystem::path& path, const LogitTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw RuntimeFailure("cannot write " + path.string());
  os << "scan_id";
  for (const auto& c : table.class_names()) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << table.ids()[i];
    for (double v : table.scores_at(i)) os << ',' << fmt::format("{:.17g}", v);
    os << '\n';
  }
}

LogitTable read_logits_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeFailure("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ValidationError(path.string() + ": empty logit file");
  auto header = split_csv(strip_cr(line));
  if (header.size() < 2 || header[0] != "scan_id")
    throw ValidationError(path.string() + ": header must be scan_id,<class_0>,...");
  LogitTable table(std::vector<std::string>(header.begin() + 1, header.end()), path.stem().string());
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ValidationError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), lineno, header.size(), cells.size()));
    std::vector<double> scores;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      try {
        std::size_t used = 0;
        scores.push_back(std::stod(cells[c], &used));
        if (used != cells[c].size()) throw std::invalid_argument(cells[c]);
      } catch (const std::exception&) {
        throw ValidationError(fmt::format("{}:{}: bad number '{}'", path.string(), lineno, cells[c]));
      }
    }
    table.add(cells[0], std::move(scores));
  }
  return table;
}

LogitTable ensemble(const LogitTable& a, const LogitTable& b, double w, FusionSpace space) {
  HYBRIDCT_REQUIRE(w >= 0 && w <= 1, fmt::format("ensemble weight {} outside [0, 1]", w));
  if (a.class_names() != b.class_names())
    throw ValidationError(fmt::format("class order mismatch: [{}] vs [{}]", fmt::join(a.class_names(), ","),
                                      fmt::join(b.class_names(), ",")));
  std::vector<std::string> only_a, only_b;
  for (const auto& id : a.ids())
    if (!b.contains(id)) only_a.push_back(id);
  for (const auto& id : b.ids())
    if (!a.contains(id)) only_b.push_back(id);
  if (!only_a.empty() || !only_b.empty())
    throw ValidationError(fmt::format("scan id sets differ; only in first: [{}]; only in second: [{}]",
                                      fmt::join(only_a, ","), fmt::join(only_b, ",")));

  auto log_softmax = [](std::vector<double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (double& v : z) v -= lse;
    return z;
  };
  LogitTable out(a.class_names(), fmt::format("ens({})", w));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& id = a.ids()[i];
    const auto& za = a.scores_at(i);
    const auto& zb = b.scores(id);
    std::vector<double> row(za.size());
    if (space == FusionSpace::logits) {
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = w * za[c] + (1.0 - w) * zb[c];
    } else {
      const auto pa = log_softmax(za);
      const auto pb = log_softmax(zb);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = std::log(w * std::exp(pa[c]) + (1.0 - w) * std::exp(pb[c]));
    }
    out.add(id, std::move(row));
  }
  return out;
}

int argmax(const std::vector<double>& scores) {
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

std::vector<std::pair<std::string, int>> predict_labels(const LogitTable& table) {
  std::vector<std::pair<std::string, int>> out;
  for (std::size_t i = 0; i < table.size(); ++i) out.emplace_back(table.ids()[i], argmax(table.scores_at(i)));
  return out;
}

void write_predictions_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, int>>& preds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw RuntimeFailure("cannot write " + path.string());
  os << "scan_id,predicted_label\n";
  for (const auto& [id, p] : preds) os << id << ',' << p << '\n';
}

std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                                int n_classes) {
  HYBRIDCT_REQUIRE(n_classes >= 1, "n_classes must be >= 1");
  HYBRIDCT_REQUIRE(preds.size() == labels.size(), "predictions and labels differ in length");
  std::vector<std::vector<long>> cm(n_classes, std::vector<long>(n_classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    HYBRIDCT_REQUIRE(labels[i] >= 0 && labels[i] < n_classes, fmt::format("label {} outside [0, {})", labels[i], n_classes));
    HYBRIDCT_REQUIRE(preds[i] >= 0 && preds[i] < n_classes, fmt::format("prediction {} outside [0, {})", preds[i], n_classes));
    ++cm[labels[i]][preds[i]];
  }
  return cm;
}

std::vector<ClassStats> class_stats(const std::vector<int>& preds, const std::vector<int>& labels, int n_classes) {
  const auto cm = confusion_matrix(preds, labels, n_classes);
  std::vector<ClassStats> out(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    long tp = cm[c][c], pred_c = 0, true_c = 0;
    for (int k = 0; k < n_classes; ++k) {
      pred_c += cm[k][c];
      true_c += cm[c][k];
    }
    auto& s = out[c];
    s.support = true_c;
    s.precision = pred_c > 0 ? static_cast<double>(tp) / pred_c : 0.0;
    s.recall = true_c > 0 ? static_cast<double>(tp) / true_c : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  }
  return out;
}

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels, int n_classes) {
  const auto stats = class_stats(preds, labels, n_classes);
  double s = 0.0;
  for (const auto& c : stats) s += c.f1;
  return s / n_classes;
}

GroupedF1 grouped_macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                           const std::vector<std::string>& groups, int n_classes) {
  HYBRIDCT_REQUIRE(groups.size() == preds.size() && labels.size() == preds.size(), "every sample needs a group id");
  HYBRIDCT_REQUIRE(!groups.empty(), "grouped_macro_f1: empty group set");
  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> parts;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    parts[groups[i]].first.push_back(preds[i]);
    parts[groups[i]].second.push_back(labels[i]);
  }
  GroupedF1 out;
  for (const auto& [g, pl] : parts) out.per_group[g] = macro_f1(pl.first, pl.second, n_classes);
  double s = 0.0;
  for (const auto& [g, v] : out.per_group) s += v;
  out.group_mean = s / static_cast<double>(out.per_group.size());
  return out;
}

double fairness_gap(const std::map<std::string, double>& per_group) {
  const auto f = per_group.find("female");
  const auto m = per_group.find("male");
  HYBRIDCT_REQUIRE(f != per_group.end() && m != per_group.end(), "fairness_gap needs both female and male groups");
  return std::abs(f->second - m->second);
}

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      na.erase(0, std::min(na.find_first_not_of('0'), na.size() - 1));
      nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size() - 1));
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

std::vector<std::string> natural_sorted(std::vector<std::string> keys) {
  std::stable_sort(keys.begin(), keys.end(), natural_less);
  return keys;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["model_tag"] = model_tag;
  j["class_names"] = class_names;
  j["group_by"] = group_by;
  j["n_samples"] = n_samples;
  j["overall_macro_f1"] = overall_macro_f1;
  j["accuracy"] = accuracy;
  j["per_group"] = per_group;
  j["group_mean_macro_f1"] = group_mean_macro_f1;
  j["per_class"] = nlohmann::json::array();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& s = per_class[c];
    j["per_class"].push_back({{"class", c < class_names.size() ? class_names[c] : std::to_string(c)},
                              {"precision", s.precision},
                              {"recall", s.recall},
                              {"f1", s.f1},
                              {"support", s.support}});
  }
  j["confusion_matrix"] = confusion;
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.model_tag = j.value("model_tag", std::string{});
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.group_by = j.value("group_by", std::string{});
    r.n_samples = j.value("n_samples", 0L);
    r.overall_macro_f1 = j.at("overall_macro_f1").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.per_group = j.at("per_group").get<std::map<std::string, double>>();
    r.group_mean_macro_f1 = j.at("group_mean_macro_f1").get<double>();
    for (const auto& c : j.at("per_class"))
      r.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>(),
                             c.value("support", 0L)});
    r.confusion = j.value("confusion_matrix", std::vector<std::vector<long>>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed metrics report: ") + e.what());
  }
}

MetricsReport compute_metrics(const std::vector<int>& preds, const std::vector<int>& labels,
                              const std::vector<std::string>& groups, std::vector<std::string> class_names,
                              const std::string& group_by, const std::string& model_tag) {
  const int C = static_cast<int>(class_names.size());
  MetricsReport r;
  r.model_tag = model_tag;
  r.class_names = std::move(class_names);
  r.group_by = group_by;
  r.n_samples = static_cast<long>(preds.size());
  r.confusion = confusion_matrix(preds, labels, C);
  r.per_class = class_stats(preds, labels, C);
  r.overall_macro_f1 = macro_f1(preds, labels, C);
  long correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  r.accuracy = preds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(preds.size());
  if (!groups.empty()) {
    const auto g = grouped_macro_f1(preds, labels, groups, C);
    r.per_group = g.per_group;
    r.group_mean_macro_f1 = g.group_mean;
  } else {
    r.group_mean_macro_f1 = r.overall_macro_f1;
  }
  return r;
}

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw RuntimeFailure("cannot write " + path.string());
  os << report.to_json().dump(2) << '\n';
}

MetricsReport read_metrics_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeFailure("cannot open " + path.string());
  try {
    return MetricsReport::from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace hybridct::eval

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace hybridct::eval {

/// Raw per-scan class scores from one model, in insertion order.
class LogitTable {
 public:
  LogitTable() = default;
  LogitTable(std::vector<std::string> class_names, std::string model_tag = {});

  void add(const std::string& scan_id, std::vector<double> scores);

  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::string& model_tag() const { return model_tag_; }
  void set_model_tag(std::string tag) { model_tag_ = std::move(tag); }
  int n_classes() const { return static_cast<int>(class_names_.size()); }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& scores(const std::string& scan_id) const;
  const std::vector<double>& scores_at(std::size_t i) const { return rows_[i]; }
  bool contains(const std::string& scan_id) const { return index_.count(scan_id) > 0; }

 private:
  std::vector<std::string> class_names_;
  std::string model_tag_;
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> rows_;
  std::map<std::string, std::size_t> index_;
};

/// Display names by label index: detection {non-COVID, COVID}; diagnosis {Normal, COVID, A, G};
/// otherwise class_<k>.
std::vector<std::string> default_class_names(int n_classes);

/// CSV with header `scan_id,<class_0>,...`; values printed with 17 significant digits.
void write_logits_csv(const std::filesystem::path& path, const LogitTable& table);
LogitTable read_logits_csv(const std::filesystem::path& path);

enum class FusionSpace { logits, probabilities };

/// w * a + (1 - w) * b per scan, in a's scan order. `a` is the 2.5D table by convention.
/// In probability space each row is softmaxed first and the result is stored as log-probabilities.
LogitTable ensemble(const LogitTable& a, const LogitTable& b, double w, FusionSpace space = FusionSpace::logits);

/// Argmax per scan, ties to the lowest class index; in table order.
std::vector<std::pair<std::string, int>> predict_labels(const LogitTable& table);
int argmax(const std::vector<double>& scores);

void write_predictions_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, int>>& preds);

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
};

/// confusion[true][pred].
std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                                int n_classes);
std::vector<ClassStats> class_stats(const std::vector<int>& preds, const std::vector<int>& labels, int n_classes);

/// Unweighted mean of per-class F1 over all n_classes; a class with P + R = 0 contributes 0.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels, int n_classes);

struct GroupedF1 {
  std::map<std::string, double> per_group;
  double group_mean = 0.0;
};

GroupedF1 grouped_macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                           const std::vector<std::string>& groups, int n_classes);

/// |F1_female - F1_male|.
double fairness_gap(const std::map<std::string, double>& per_group);

/// Orders numeric runs by value: "2" < "10", "H2" < "H10".
bool natural_less(const std::string& a, const std::string& b);
std::vector<std::string> natural_sorted(std::vector<std::string> keys);

struct MetricsReport {
  std::string model_tag;
  std::vector<std::string> class_names;
  std::string group_by;  // "source", "gender" or empty
  long n_samples = 0;
  double overall_macro_f1 = 0.0;
  double accuracy = 0.0;
  std::map<std::string, double> per_group;
  double group_mean_macro_f1 = 0.0;
  std::vector<ClassStats> per_class;
  std::vector<std::vector<long>> confusion;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

MetricsReport compute_metrics(const std::vector<int>& preds, const std::vector<int>& labels,
                              const std::vector<std::string>& groups, std::vector<std::string> class_names,
                              const std::string& group_by, const std::string& model_tag = {});

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_metrics_json(const std::filesystem::path& path);

}  // namespace hybridct::eval

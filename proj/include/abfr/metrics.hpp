#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace abfr {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;

  bool operator==(const RocPoint&) const = default;
};

// Positive class = ASD (label 1).
struct MetricsReport {
  double acc = 0.0, auc = 0.0, f1 = 0.0, precision = 0.0, sensitivity = 0.0, specificity = 0.0;
  Confusion confusion;
  std::vector<RocPoint> roc_points;
  // Names of metrics whose denominator was zero; they are reported as 0.
  std::vector<std::string> undefined;
};

inline const std::vector<std::string> kMetricNames{"acc", "auc", "f1", "precision", "sensitivity", "specificity"};

double metric_value(const MetricsReport& r, const std::string& name);

// Ratio metrics from a confusion matrix; auc and roc_points are left empty.
MetricsReport metrics_from_confusion(const Confusion& c);

// scores: positive-class probabilities; predicted positive when score >= threshold.
MetricsReport compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

// Thresholds at every distinct score, highest first; tied scores move both
// rates in a single step, and consecutive steps along the same axis are merged
// into one. Starts at (0, 0) and ends at (1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

// Trapezoidal area under roc_curve. Throws UndefinedAuc unless both classes occur.
double auc(std::span<const double> scores, std::span<const int> labels);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

struct NamedRoc {
  std::string model_name;
  std::vector<RocPoint> points;
};

// CSV with header model_name,fpr,tpr; values printed with 17 significant digits.
void export_roc(std::span<const NamedRoc> curves, const std::filesystem::path& path);
std::vector<NamedRoc> read_roc_csv(const std::filesystem::path& path);

}  // namespace abfr

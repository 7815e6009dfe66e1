#include "abfr/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "abfr/errors.hpp"

namespace abfr {

double metric_value(const MetricsReport& r, const std::string& name) {
  if (name == "acc") return r.acc;
  if (name == "auc") return r.auc;
  if (name == "f1") return r.f1;
  if (name == "precision") return r.precision;
  if (name == "sensitivity") return r.sensitivity;
  if (name == "specificity") return r.specificity;
  throw ValidationError("unknown metric '" + name + "'");
}

MetricsReport metrics_from_confusion(const Confusion& c) {
  MetricsReport r;
  r.confusion = c;
  auto ratio = [&r](std::size_t num, std::size_t den, const char* name) {
    if (den == 0) {
      r.undefined.emplace_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.acc = ratio(c.tp + c.tn, c.total(), "acc");
  r.precision = ratio(c.tp, c.tp + c.fp, "precision");
  r.sensitivity = ratio(c.tp, c.tp + c.fn, "sensitivity");
  r.specificity = ratio(c.tn, c.tn + c.fp, "specificity");
  // Harmonic mean of precision and sensitivity, 2tp / (2tp + fp + fn).
  r.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, "f1");
  return r;
}

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ValidationError("metrics: " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(labels.size()) + " labels");
  if (scores.empty()) throw ValidationError("metrics: empty evaluation set");
  for (int y : labels)
    if (y != 0 && y != 1) throw ValidationError("metrics: labels must be 0 or 1");
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedAuc("ROC needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    const RocPoint next{static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos)};
    // Merge a step that continues the previous one along the same axis.
    if (pts.size() >= 2) {
      const auto& a = pts[pts.size() - 2];
      const auto& b = pts.back();
      if ((a.fpr == b.fpr && b.fpr == next.fpr) || (a.tpr == b.tpr && b.tpr == next.tpr)) pts.pop_back();
    }
    pts.push_back(next);
    i = j;
  }
  return pts;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  const auto pts = roc_curve(scores, labels);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
  return area;
}

MetricsReport compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("metrics: scores must be probabilities in [0, 1]");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1)
      (predicted ? c.tp : c.fn) += 1;
    else
      (predicted ? c.fp : c.tn) += 1;
  }
  auto r = metrics_from_confusion(c);
  const bool both = c.tp + c.fn > 0 && c.tn + c.fp > 0;
  if (both) {
    r.roc_points = roc_curve(scores, labels);
    r.auc = auc(scores, labels);
  } else {
    r.undefined.emplace_back("auc");
  }
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : r.roc_points) roc.push_back({p.fpr, p.tpr});
  return {{"acc", r.acc},
          {"auc", r.auc},
          {"f1", r.f1},
          {"precision", r.precision},
          {"sensitivity", r.sensitivity},
          {"specificity", r.specificity},
          {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}}},
          {"roc_points", roc},
          {"undefined", r.undefined}};
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.acc = j.at("acc").get<double>();
  r.auc = j.at("auc").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.precision = j.at("precision").get<double>();
  r.sensitivity = j.at("sensitivity").get<double>();
  r.specificity = j.at("specificity").get<double>();
  const auto& c = j.at("confusion");
  r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("fn").get<std::size_t>(),
                 c.at("tn").get<std::size_t>()};
  for (const auto& p : j.value("roc_points", nlohmann::json::array()))
    r.roc_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  r.undefined = j.value("undefined", std::vector<std::string>{});
  return r;
}

void export_roc(std::span<const NamedRoc> curves, const std::filesystem::path& path) {
  if (curves.empty()) throw ValidationError("export_roc: no curves");
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "model_name,fpr,tpr\n" << std::setprecision(17);
  for (const auto& c : curves) {
    if (c.model_name.find_first_of(",\n\"") != std::string::npos)
      throw ValidationError("export_roc: model name may not contain commas, quotes or newlines");
    for (const auto& p : c.points) os << c.model_name << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  if (!os) throw Error("write failed for " + path.string());
}

std::vector<NamedRoc> read_roc_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "model_name,fpr,tpr")
    throw ParseError(ParseErrorKind::bad_magic, path.string() + ": missing ROC CSV header");
  std::vector<NamedRoc> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name, fpr, tpr;
    if (!std::getline(ss, name, ',') || !std::getline(ss, fpr, ',') || !std::getline(ss, tpr))
      throw ParseError(ParseErrorKind::malformed, path.string() + ": bad row '" + line + "'");
    if (out.empty() || out.back().model_name != name) out.push_back({name, {}});
    try {
      out.back().points.push_back({std::stod(fpr), std::stod(tpr)});
    } catch (const std::exception&) {
      throw ParseError(ParseErrorKind::malformed, path.string() + ": bad number in '" + line + "'");
    }
  }
  return out;
}

}  // namespace abfr

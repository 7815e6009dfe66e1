#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "abfr/anchors.hpp"
#include "abfr/dataset.hpp"
#include "abfr/features.hpp"
#include "abfr/metrics.hpp"
#include "abfr/transformer.hpp"

namespace abfr {

struct TrainSpec {
  std::size_t epochs = 100;
  double learning_rate = 0.0009;
  std::size_t batch_size = 8;
  std::size_t folds = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainSpec& s);
TrainSpec train_spec_from_json(const nlohmann::json& j);

struct Predictions {
  std::vector<double> scores;  // P(ASD)
  std::vector<int> labels;
};

struct TrainOutcome {
  std::vector<double> loss_history;  // mean training loss per epoch
};

// Mini-batch Adam on the model's training loss. Each epoch reshuffles the
// samples from Rng(seed); DropPath draws from a second stream seeded with
// seed ^ kDropPathStream. A batch size larger than the set trains full-batch.
TrainOutcome train_one(ClassifierModel& model, std::span<const LabeledSample> train, const TrainSpec& spec);

inline constexpr std::uint64_t kDropPathStream = 0x9E3779B97F4A7C15ULL;

Predictions predict(const ClassifierModel& model, std::span<const LabeledSample> samples);
MetricsReport evaluate(const ClassifierModel& model, std::span<const LabeledSample> samples);

// Each class is shuffled with Rng(seed) and dealt round-robin over the folds,
// continuing the deal position from one class to the next, so fold sizes and
// per-fold class counts differ by at most one.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed);

struct FoldResult {
  std::size_t fold_index = 0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  MetricsReport metrics;
  std::vector<double> train_loss_history;
  Predictions predictions;
  std::string checkpoint;  // empty unless checkpoints were requested
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single fold
};

using Summary = std::map<std::string, MetricSummary>;

Summary summarize(std::span<const FoldResult> folds);

struct CvResult {
  ModelConfig config;
  TrainSpec spec;
  std::size_t n_parameters = 0;
  std::vector<FoldResult> folds;
  Summary summary;
};

struct CvOptions {
  std::size_t jobs = 1;
  std::optional<std::filesystem::path> checkpoint_dir;
};

// Fold f trains a fresh model seeded with config.seed + f on the other folds
// (training stream spec.seed + f) and is evaluated on fold f only.
CvResult cross_validate(std::span<const LabeledSample> dataset, ModelConfig config, const TrainSpec& spec,
                        const CvOptions& opts = {});

nlohmann::json to_json(const CvResult& r);
CvResult cv_result_from_json(const nlohmann::json& j);

// Train on one cohort, evaluate on another.
MetricsReport cross_cohort(std::span<const LabeledSample> train, std::span<const LabeledSample> test,
                           ModelConfig config, const TrainSpec& spec);

struct GridCell {
  AnchorMethod sampling = AnchorMethod::random;
  Patching patching = Patching::random;
  Backbone backbone = Backbone::vit;
  BlockKind encoder_ffn = BlockKind::kan;
  BlockKind head = BlockKind::kan;

  // "<sampling>-<patching>", the feature set the cell trains on.
  std::string feature_key() const;
  // "<sampling>-<patching>-<backbone>-<configuration>"
  std::string key() const;
  bool operator==(const GridCell&) const = default;
};

GridCell grid_cell_from_string(const std::string& key);

// patching, then sampling, then backbone, then configuration (mlp-mlp, kan-kan, kan-mlp, mlp-kan).
std::vector<GridCell> full_grid();

struct GridRow {
  GridCell cell;
  Summary summary;
  // Per metric: 1 = best, 2 = second best within the (sampling, patching,
  // backbone) block, 0 otherwise.
  std::map<std::string, int> flags;
};

// Ranks each metric's mean within every (sampling, patching, backbone) block.
// Higher is better; ties go to the earlier row.
void flag_best(std::vector<GridRow>& rows);

using FeatureSets = std::map<std::string, std::vector<LabeledSample>>;  // keyed by GridCell::feature_key()

struct GridOptions {
  std::size_t jobs = 1;
  // Called once per finished cell, in completion order.
  std::function<void(const GridRow&, const CvResult&)> on_cell_done;
};

std::vector<GridRow> run_experiment_grid(const FeatureSets& features, std::span<const GridCell> cells,
                                         const ModelConfig& base_config, const TrainSpec& spec,
                                         const GridOptions& opts = {});

void write_grid_csv(const std::filesystem::path& path, std::span<const GridRow> rows);
nlohmann::json to_json(const GridRow& row);

}  // namespace abfr

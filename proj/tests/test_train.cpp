#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "abfr/errors.hpp"
#include "abfr/train.hpp"
#include "oracles.hpp"
#include "toy_data.hpp"

using namespace abfr;
using abfr::testing::toy_config;
using abfr::testing::toy_samples;
namespace fs = std::filesystem;

namespace {

std::vector<int> labels_of(const std::vector<LabeledSample>& s) {
  std::vector<int> out;
  for (const auto& x : s) out.push_back(x.label);
  return out;
}

std::vector<double> flat_params(const ClassifierModel& m) {
  std::vector<double> out;
  for (const auto& p : m.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

TrainSpec quick_spec(std::size_t epochs = 3, std::size_t folds = 5) {
  TrainSpec s;
  s.epochs = epochs;
  s.folds = folds;
  s.batch_size = 4;
  s.learning_rate = 0.01;
  s.seed = 7;
  return s;
}

FoldResult fold_with(double acc) {
  FoldResult f;
  f.metrics.acc = acc;
  f.metrics.auc = 0.5 + acc / 4;
  return f;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "abfr_test_train";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("train specs validate and round trip") {
  TrainSpec s;
  CHECK(s.epochs == 100);
  CHECK(s.learning_rate == 0.0009);
  CHECK(s.folds == 5);
  CHECK_NOTHROW(s.validate());
  auto bad = s;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.folds = 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.learning_rate = -1e-3;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = s;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  s.seed = 99;
  s.batch_size = 3;
  CHECK(to_json(train_spec_from_json(to_json(s))) == to_json(s));
}

TEST_CASE("stratified folds on 73 subjects split 48/25") {
  std::vector<int> labels(73, 0);
  std::fill(labels.begin(), labels.begin() + 25, 1);
  const auto folds = stratified_folds(labels, 5, 11);
  REQUIRE(folds.size() == 5);
  std::vector<std::size_t> sizes;
  for (const auto& f : folds) sizes.push_back(f.size());
  std::sort(sizes.rbegin(), sizes.rend());
  CHECK(sizes == std::vector<std::size_t>{15, 15, 15, 14, 14});
  for (const auto& f : folds) {
    std::size_t pos = 0;
    for (auto i : f) pos += labels[i] == 1;
    CHECK(std::abs(static_cast<double>(pos) - 25.0 / 5) <= 1.0);
    CHECK(std::abs(static_cast<double>(f.size() - pos) - 48.0 / 5) <= 1.0);
  }
}

TEST_CASE("stratified folds partition the indices") {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 10 + static_cast<std::size_t>(rng.uniform_int(0, 40));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < 5 || (i >= 10 && rng.bernoulli(0.5)) ? 1 : 0;
    const auto folds = stratified_folds(labels, 5, seed);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& f : folds) {
      CHECK(std::is_sorted(f.begin(), f.end()));
      total += f.size();
      seen.insert(f.begin(), f.end());
    }
    CHECK(total == n);
    CHECK(seen.size() == n);
    CHECK(*seen.rbegin() == n - 1);
    CHECK(folds == stratified_folds(labels, 5, seed));
  }
}

TEST_CASE("balanced ten subjects give one of each class per fold") {
  std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  for (const auto& f : stratified_folds(labels, 5, 2)) {
    REQUIRE(f.size() == 2);
    CHECK(labels[f[0]] + labels[f[1]] == 1);
  }
}

TEST_CASE("stratification needs k members per class") {
  std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1, 1};
  CHECK_THROWS_AS(stratified_folds(labels, 5, 1), StratificationError);
  CHECK_NOTHROW(stratified_folds(labels, 4, 1));
}

TEST_CASE("zero learning rate leaves the model untouched") {
  const auto data = toy_samples(6, 4, 3, 1);
  auto config = toy_config(3);
  config.drop_path_rate = 0.0;
  auto model = build_model(config);
  const auto before = flat_params(model);
  auto spec = quick_spec(4);
  spec.learning_rate = 0.0;
  const auto outcome = train_one(model, data, spec);
  CHECK(flat_params(model) == before);
  REQUIRE(outcome.loss_history.size() == 4);
  for (double l : outcome.loss_history) CHECK(std::abs(l - outcome.loss_history[0]) <= 1e-12);
}

TEST_CASE("training is deterministic and records one loss per epoch") {
  const auto data = toy_samples(10, 4, 3, 2);
  auto a = build_model(toy_config(3));
  auto b = build_model(toy_config(3));
  const auto ha = train_one(a, data, quick_spec(5));
  const auto hb = train_one(b, data, quick_spec(5));
  CHECK(ha.loss_history.size() == 5);
  CHECK(ha.loss_history == hb.loss_history);
  CHECK(flat_params(a) == flat_params(b));
  auto c = build_model(toy_config(3));
  auto other = quick_spec(5);
  other.seed = 8;
  train_one(c, data, other);
  CHECK(flat_params(c) != flat_params(a));
  CHECK_THROWS_AS(train_one(c, std::span<const LabeledSample>{}, quick_spec()), ValidationError);
}

TEST_CASE("a separable four-sample set is memorized within 200 epochs") {
  const auto data = toy_samples(4, 3, 3, 3, 0.4);
  for (auto b : {Backbone::vit, Backbone::deit}) {
    auto config = toy_config(3);
    config.backbone = b;
    auto model = build_model(config);
    TrainSpec spec;
    spec.epochs = 200;
    spec.learning_rate = 0.005;
    spec.batch_size = 4;
    train_one(model, data, spec);
    CHECK(evaluate(model, data).acc == 1.0);
  }
}

TEST_CASE("predict returns probabilities from the averaged logits") {
  const auto data = toy_samples(5, 3, 3, 4);
  const auto model = build_model(toy_config(3));
  const auto p = predict(model, data);
  REQUIRE(p.scores.size() == 5);
  CHECK(p.labels == labels_of(data));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<TokenInputs> one{token_inputs(data[i].rep)};
    ForwardContext eval;
    const auto logits = forward(model, one, eval).logits;
    CHECK(p.scores[i] == doctest::Approx(1.0 / (1.0 + std::exp(logits.at(0) - logits.at(1)))).epsilon(1e-15));
  }
}

TEST_CASE("summaries use the mean and the sample standard deviation") {
  const std::vector<FoldResult> folds{fold_with(0.5), fold_with(0.75), fold_with(1.0)};
  const auto s = summarize(folds);
  CHECK(s.at("acc").mean == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s.at("acc").std == doctest::Approx(0.25).epsilon(1e-15));
  const std::vector<FoldResult> same{fold_with(0.6), fold_with(0.6), fold_with(0.6)};
  CHECK(summarize(same).at("acc").std == 0.0);
  CHECK(summarize(same).at("auc").std == 0.0);
  CHECK(summarize(std::vector<FoldResult>{fold_with(0.3)}).at("acc").std == 0.0);
}

TEST_CASE("cross validation keeps test folds out of training") {
  const auto data = toy_samples(20, 4, 3, 5);
  const auto ckpt = scratch("ckpt");
  fs::remove_all(ckpt);
  CvOptions opts;
  opts.checkpoint_dir = ckpt;
  const auto r = cross_validate(data, toy_config(3), quick_spec(2), opts);
  REQUIRE(r.folds.size() == 5);
  CHECK(r.config.n_anchors == 3);
  CHECK(r.n_parameters == count_parameters(build_model(r.config)));
  std::set<std::size_t> tested;
  for (const auto& f : r.folds) {
    for (auto i : f.test_indices) {
      CHECK(std::find(f.train_indices.begin(), f.train_indices.end(), i) == f.train_indices.end());
      tested.insert(i);
    }
    CHECK(f.train_indices.size() + f.test_indices.size() == data.size());
    CHECK(f.train_loss_history.size() == 2);
    CHECK(f.metrics.confusion.total() == f.test_indices.size());
    CHECK(f.predictions.scores.size() == f.test_indices.size());
    for (std::size_t k = 0; k < f.test_indices.size(); ++k)
      CHECK(f.predictions.labels[k] == data[f.test_indices[k]].label);
    CHECK(fs::exists(f.checkpoint));
  }
  CHECK(tested.size() == data.size());
  for (const auto& name : kMetricNames) {
    double mean = 0;
    for (const auto& f : r.folds) mean += metric_value(f.metrics, name) / 5.0;
    CHECK(r.summary.at(name).mean == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("cross validation is reproducible and independent of the thread count") {
  const auto data = toy_samples(10, 3, 3, 6);
  const auto a = cross_validate(data, toy_config(3), quick_spec(2));
  CvOptions two;
  two.jobs = 3;
  const auto b = cross_validate(data, toy_config(3), quick_spec(2), two);
  CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("cv results round trip through JSON") {
  const auto data = toy_samples(10, 3, 3, 7);
  const auto r = cross_validate(data, toy_config(3), quick_spec(1));
  const auto text = to_json(r).dump();
  CHECK(to_json(cv_result_from_json(nlohmann::json::parse(text))).dump() == text);
  CHECK_THROWS_AS(cv_result_from_json(nlohmann::json{{"format", "other"}}), ParseError);
}

TEST_CASE("cross cohort trains on one set and scores the other") {
  const auto a = toy_samples(12, 3, 3, 8);
  const auto b = toy_samples(8, 3, 3, 9);
  const auto m = cross_cohort(a, b, toy_config(3), quick_spec(20));
  CHECK(m.confusion.total() == 8);
  CHECK(m.acc >= 0.75);
  const auto wrong = toy_samples(8, 3, 4, 9);
  CHECK_THROWS_AS(cross_cohort(a, wrong, toy_config(3), quick_spec(1)), ValidationError);
}

TEST_CASE("the full grid has 32 distinct cells") {
  const auto cells = full_grid();
  REQUIRE(cells.size() == 32);
  std::set<std::string> keys;
  for (const auto& c : cells) {
    keys.insert(c.key());
    CHECK(grid_cell_from_string(c.key()) == c);
  }
  CHECK(keys.size() == 32);
  CHECK(cells.front().key() == "grid-random-vit-mlp-mlp");
  CHECK(cells.back().key() == "random-iterative-deit-mlp-kan");
  CHECK_THROWS_AS(grid_cell_from_string("grid-random-vit"), ValidationError);
  CHECK_THROWS_AS(grid_cell_from_string("grid-random-vit-kan-gru"), ValidationError);
}

TEST_CASE("a singleton grid is one cross validation") {
  const auto data = toy_samples(10, 3, 3, 10);
  const FeatureSets features{{"random-random", data}};
  const GridCell cell{};
  auto config = toy_config(3);
  const auto rows = run_experiment_grid(features, std::span<const GridCell>(&cell, 1), config, quick_spec(1));
  REQUIRE(rows.size() == 1);
  config.backbone = cell.backbone;
  const auto cv = cross_validate(data, config, quick_spec(1));
  for (const auto& name : kMetricNames) {
    CHECK(rows[0].summary.at(name).mean == cv.summary.at(name).mean);
    CHECK(rows[0].summary.at(name).std == cv.summary.at(name).std);
    CHECK(rows[0].flags.at(name) == 1);
  }
}

TEST_CASE("best flags match a brute-force argmax") {
  Rng rng(12);
  auto cells = full_grid();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<GridRow> rows;
    for (const auto& c : cells) {
      GridRow r;
      r.cell = c;
      // coarse values so ties occur
      for (const auto& name : kMetricNames) r.summary[name] = {static_cast<double>(rng.uniform_int(0, 4)) / 4.0, 0.1};
      rows.push_back(r);
    }
    const auto want = oracle::argmax_flags(rows);
    flag_best(rows);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].flags == want[i]);
  }
}

TEST_CASE("grid runs report every cell, persist rows and are reproducible") {
  const auto a = toy_samples(8, 3, 3, 13);
  const auto b = toy_samples(8, 3, 3, 14);
  const FeatureSets features{{"grid-random", a}, {"random-iterative", b}};
  std::vector<GridCell> cells;
  for (const auto& c : full_grid())
    if (features.contains(c.feature_key()) && c.backbone == Backbone::vit) cells.push_back(c);
  REQUIRE(cells.size() == 8);
  auto spec = quick_spec(1, 2);
  std::size_t calls = 0;
  GridOptions opts;
  opts.on_cell_done = [&](const GridRow&, const CvResult& r) {
    ++calls;
    CHECK(r.folds.size() == 2);
  };
  const auto rows = run_experiment_grid(features, cells, toy_config(3), spec, opts);
  CHECK(calls == 8);
  REQUIRE(rows.size() == 8);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].cell == cells[i]);
    for (const auto& name : kMetricNames) CHECK(std::isfinite(rows[i].summary.at(name).mean));
  }
  GridOptions parallel;
  parallel.jobs = 4;
  const auto again = run_experiment_grid(features, cells, toy_config(3), spec, parallel);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(to_json(again[i]).dump() == to_json(rows[i]).dump());

  const auto csv = scratch("grid.csv");
  write_grid_csv(csv, rows);
  std::ifstream is(csv);
  std::string header, line;
  std::getline(is, header);
  CHECK(header.rfind("sampling,patching,backbone,model,acc_mean,acc_std,acc_flag,auc_mean", 0) == 0);
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    CHECK(std::count(line.begin(), line.end(), ',') == std::count(header.begin(), header.end(), ','));
  }
  CHECK(n == 8);

  const GridCell missing{AnchorMethod::random, Patching::random, Backbone::vit, BlockKind::kan, BlockKind::kan};
  CHECK_THROWS_AS(run_experiment_grid(features, std::span<const GridCell>(&missing, 1), toy_config(3), spec),
                  ValidationError);
}

#include "abfr/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "abfr/checkpoint.hpp"
#include "abfr/errors.hpp"
#include "abfr/optim.hpp"

namespace abfr {

void TrainSpec::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be a non-negative number");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (folds < 2) throw ValidationError("folds must be at least 2");
}

nlohmann::json to_json(const TrainSpec& s) {
  return {{"epochs", s.epochs},
          {"learning_rate", s.learning_rate},
          {"batch_size", s.batch_size},
          {"folds", s.folds},
          {"seed", s.seed}};
}

TrainSpec train_spec_from_json(const nlohmann::json& j) {
  TrainSpec s;
  s.epochs = j.value("epochs", s.epochs);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.folds = j.value("folds", s.folds);
  s.seed = j.value("seed", s.seed);
  return s;
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

double positive_probability(const Tensor& logits, std::size_t row) {
  // softmax over two classes, computed stably
  const double z0 = logits.at(row, 0), z1 = logits.at(row, 1);
  return 1.0 / (1.0 + std::exp(z0 - z1));
}

}  // namespace

TrainOutcome train_one(ClassifierModel& model, std::span<const LabeledSample> train, const TrainSpec& spec) {
  if (spec.epochs < 1) throw ValidationError("epochs must be at least 1");
  if (!(spec.learning_rate >= 0.0)) throw ValidationError("learning_rate must be non-negative");
  if (spec.batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (train.empty()) throw ValidationError("training set is empty");

  std::vector<TokenInputs> inputs;
  inputs.reserve(train.size());
  for (const auto& s : train) inputs.push_back(token_inputs(s.rep));

  const auto named = model.parameters();
  std::vector<Tensor> params;
  for (const auto& p : named) params.push_back(p.tensor);
  auto state = AdamState::for_params(params, spec.learning_rate);

  Rng shuffle_rng(spec.seed);
  Rng drop_rng(spec.seed ^ kDropPathStream);
  const std::size_t batch = std::min(spec.batch_size, train.size());

  TrainOutcome outcome;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<TokenInputs> batch_inputs;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        batch_inputs.push_back(inputs[order[i]]);
        labels.push_back(train[order[i]].label);
      }
      for (auto& p : params) p.zero_grad();
      ForwardContext ctx{true, &drop_rng, false};
      const auto out = forward(model, batch_inputs, ctx);
      const Tensor loss = training_loss(model, out, labels);
      backward(loss);
      adam_step(params, state);
      total += loss.item() * static_cast<double>(end - start);
    }
    outcome.loss_history.push_back(total / static_cast<double>(train.size()));
  }
  return outcome;
}

Predictions predict(const ClassifierModel& model, std::span<const LabeledSample> samples) {
  Predictions p;
  ForwardContext ctx;
  for (const auto& s : samples) {
    const TokenInputs in[] = {token_inputs(s.rep)};
    const auto out = forward(model, in, ctx);
    p.scores.push_back(positive_probability(out.logits, 0));
    p.labels.push_back(s.label);
  }
  return p;
}

MetricsReport evaluate(const ClassifierModel& model, std::span<const LabeledSample> samples) {
  const auto p = predict(model, samples);
  return compute_metrics(p.scores, p.labels);
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("stratified_folds: k must be at least 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class)
    if (members.size() < k)
      throw StratificationError("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                                " members, fewer than " + std::to_string(k) + " folds");
  std::vector<std::vector<std::size_t>> folds(k);
  Rng rng(seed);
  std::size_t deal = 0;
  for (auto& [label, members] : by_class) {
    shuffle(members, rng);
    for (auto idx : members) folds[deal++ % k].push_back(idx);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

Summary summarize(std::span<const FoldResult> folds) {
  Summary s;
  for (const auto& name : kMetricNames) {
    std::vector<double> v;
    for (const auto& f : folds) v.push_back(metric_value(f.metrics, name));
    MetricSummary m;
    if (!v.empty()) m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - m.mean) * (x - m.mean);
      m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    s[name] = m;
  }
  return s;
}

namespace {

// Runs task(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<LabeledSample> gather(std::span<const LabeledSample> data, std::span<const std::size_t> idx) {
  std::vector<LabeledSample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace

CvResult cross_validate(std::span<const LabeledSample> dataset, ModelConfig config, const TrainSpec& spec,
                        const CvOptions& opts) {
  spec.validate();
  if (dataset.empty()) throw ValidationError("cross_validate: empty dataset");
  config.n_anchors = dataset.front().rep.n_anchors;
  for (const auto& s : dataset)
    if (s.rep.n_anchors != config.n_anchors) throw ValidationError("samples disagree on the anchor count");

  std::vector<int> labels;
  for (const auto& s : dataset) labels.push_back(s.label);
  const auto folds = stratified_folds(labels, spec.folds, spec.seed);

  CvResult result;
  result.config = config;
  result.spec = spec;
  result.n_parameters = count_parameters(build_model(config));
  result.folds.resize(folds.size());

  parallel_for(folds.size(), opts.jobs, [&](std::size_t f) {
    FoldResult& fr = result.folds[f];
    fr.fold_index = f;
    fr.test_indices = folds[f];
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) fr.train_indices.insert(fr.train_indices.end(), folds[g].begin(), folds[g].end());
    std::sort(fr.train_indices.begin(), fr.train_indices.end());

    ModelConfig fold_config = config;
    fold_config.seed = config.seed + f;
    TrainSpec fold_spec = spec;
    fold_spec.seed = spec.seed + f;
    auto model = build_model(fold_config);
    const auto train_set = gather(dataset, fr.train_indices);
    const auto test_set = gather(dataset, fr.test_indices);
    fr.train_loss_history = train_one(model, train_set, fold_spec).loss_history;
    fr.predictions = predict(model, test_set);
    fr.metrics = compute_metrics(fr.predictions.scores, fr.predictions.labels);
    if (opts.checkpoint_dir) {
      std::filesystem::create_directories(*opts.checkpoint_dir);
      const auto path = *opts.checkpoint_dir / ("fold" + std::to_string(f) + ".ckpt.json");
      save_checkpoint(path, model.parameters(), {{"model_config", to_json(fold_config)}, {"fold", f}});
      fr.checkpoint = path.string();
    }
  });
  result.summary = summarize(result.folds);
  return result;
}

namespace {

nlohmann::json to_json(const Summary& s) {
  nlohmann::json j;
  for (const auto& [name, m] : s) j[name] = {{"mean", m.mean}, {"std", m.std}};
  return j;
}

Summary summary_from_json(const nlohmann::json& j) {
  Summary s;
  for (const auto& [name, m] : j.items()) s[name] = {m.at("mean").get<double>(), m.at("std").get<double>()};
  return s;
}

}  // namespace

nlohmann::json to_json(const CvResult& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold_index},
                     {"train_indices", f.train_indices},
                     {"test_indices", f.test_indices},
                     {"metrics", to_json(f.metrics)},
                     {"train_loss_history", f.train_loss_history},
                     {"scores", f.predictions.scores},
                     {"labels", f.predictions.labels},
                     {"checkpoint", f.checkpoint}});
  return {{"format", "abfr-cv-result"},
          {"model_config", to_json(r.config)},
          {"train_spec", to_json(r.spec)},
          {"n_parameters", r.n_parameters},
          {"folds", folds},
          {"summary", to_json(r.summary)}};
}

CvResult cv_result_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "abfr-cv-result") throw ParseError(ParseErrorKind::bad_magic, "not a CV result");
  CvResult r;
  r.config = model_config_from_json(j.at("model_config"));
  r.spec = train_spec_from_json(j.at("train_spec"));
  r.n_parameters = j.value("n_parameters", std::size_t{0});
  for (const auto& f : j.at("folds")) {
    FoldResult fr;
    fr.fold_index = f.at("fold").get<std::size_t>();
    fr.train_indices = f.at("train_indices").get<std::vector<std::size_t>>();
    fr.test_indices = f.at("test_indices").get<std::vector<std::size_t>>();
    fr.metrics = metrics_report_from_json(f.at("metrics"));
    fr.train_loss_history = f.at("train_loss_history").get<std::vector<double>>();
    fr.predictions.scores = f.at("scores").get<std::vector<double>>();
    fr.predictions.labels = f.at("labels").get<std::vector<int>>();
    fr.checkpoint = f.value("checkpoint", "");
    r.folds.push_back(std::move(fr));
  }
  r.summary = summary_from_json(j.at("summary"));
  return r;
}

MetricsReport cross_cohort(std::span<const LabeledSample> train, std::span<const LabeledSample> test,
                           ModelConfig config, const TrainSpec& spec) {
  if (train.empty() || test.empty()) throw ValidationError("cross_cohort: empty cohort");
  config.n_anchors = train.front().rep.n_anchors;
  if (test.front().rep.n_anchors != config.n_anchors) throw ValidationError("cohorts disagree on the anchor count");
  auto model = build_model(config);
  train_one(model, train, spec);
  return evaluate(model, test);
}

std::string GridCell::feature_key() const { return to_string(sampling) + "-" + to_string(patching); }

std::string GridCell::key() const {
  return feature_key() + "-" + to_string(backbone) + "-" + configuration_name(encoder_ffn, head);
}

GridCell grid_cell_from_string(const std::string& key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= key.size(); ++i)
    if (i == key.size() || key[i] == '-') {
      parts.push_back(key.substr(start, i - start));
      start = i + 1;
    }
  if (parts.size() != 5) throw ValidationError("grid cell '" + key + "' must look like random-iterative-vit-kan-kan");
  GridCell c;
  c.sampling = anchor_method_from_string(parts[0]);
  c.patching = patching_from_string(parts[1]);
  c.backbone = backbone_from_string(parts[2]);
  std::tie(c.encoder_ffn, c.head) = configuration_from_string(parts[3] + "-" + parts[4]);
  return c;
}

std::vector<GridCell> full_grid() {
  std::vector<GridCell> cells;
  const std::pair<BlockKind, BlockKind> configs[] = {{BlockKind::mlp, BlockKind::mlp},
                                                     {BlockKind::kan, BlockKind::kan},
                                                     {BlockKind::kan, BlockKind::mlp},
                                                     {BlockKind::mlp, BlockKind::kan}};
  for (auto patching : {Patching::random, Patching::iterative})
    for (auto sampling : {AnchorMethod::grid, AnchorMethod::random})
      for (auto backbone : {Backbone::vit, Backbone::deit})
        for (auto [ffn, head] : configs) cells.push_back({sampling, patching, backbone, ffn, head});
  return cells;
}

void flag_best(std::vector<GridRow>& rows) {
  std::map<std::string, std::vector<std::size_t>> blocks;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& c = rows[i].cell;
    blocks[c.feature_key() + "-" + to_string(c.backbone)].push_back(i);
    for (const auto& name : kMetricNames) rows[i].flags[name] = 0;
  }
  for (const auto& [key, members] : blocks)
    for (const auto& name : kMetricNames) {
      auto order = members;
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return rows[a].summary.at(name).mean > rows[b].summary.at(name).mean;
      });
      if (!order.empty()) rows[order[0]].flags[name] = 1;
      if (order.size() > 1) rows[order[1]].flags[name] = 2;
    }
}

std::vector<GridRow> run_experiment_grid(const FeatureSets& features, std::span<const GridCell> cells,
                                         const ModelConfig& base_config, const TrainSpec& spec,
                                         const GridOptions& opts) {
  if (cells.empty()) throw ValidationError("experiment grid has no cells");
  for (const auto& c : cells)
    if (!features.contains(c.feature_key()))
      throw ValidationError("no features for '" + c.feature_key() + "' (needed by cell " + c.key() + ")");

  std::vector<GridRow> rows(cells.size());
  std::mutex callback_mutex;
  parallel_for(cells.size(), opts.jobs, [&](std::size_t i) {
    const auto& cell = cells[i];
    ModelConfig config = base_config;
    config.backbone = cell.backbone;
    config.encoder_ffn = cell.encoder_ffn;
    config.head = cell.head;
    const auto result = cross_validate(features.at(cell.feature_key()), config, spec);
    rows[i].cell = cell;
    rows[i].summary = result.summary;
    if (opts.on_cell_done) {
      std::lock_guard lock(callback_mutex);
      opts.on_cell_done(rows[i], result);
    }
  });
  flag_best(rows);
  return rows;
}

void write_grid_csv(const std::filesystem::path& path, std::span<const GridRow> rows) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "sampling,patching,backbone,model";
  for (const auto& name : kMetricNames) os << ',' << name << "_mean," << name << "_std," << name << "_flag";
  os << '\n' << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) {
    os << to_string(r.cell.sampling) << ',' << to_string(r.cell.patching) << ',' << to_string(r.cell.backbone) << ','
       << configuration_name(r.cell.encoder_ffn, r.cell.head);
    for (const auto& name : kMetricNames) {
      const auto& m = r.summary.at(name);
      const auto flag = r.flags.contains(name) ? r.flags.at(name) : 0;
      os << ',' << m.mean << ',' << m.std << ',' << (flag == 1 ? "best" : flag == 2 ? "second" : "");
    }
    os << '\n';
  }
  if (!os) throw Error("write failed for " + path.string());
}

nlohmann::json to_json(const GridRow& row) {
  nlohmann::json metrics;
  for (const auto& [name, m] : row.summary) {
    const auto flag = row.flags.contains(name) ? row.flags.at(name) : 0;
    metrics[name] = {{"mean", m.mean}, {"std", m.std}, {"flag", flag}};
  }
  return {{"cell", row.cell.key()},
          {"sampling", to_string(row.cell.sampling)},
          {"patching", to_string(row.cell.patching)},
          {"backbone", to_string(row.cell.backbone)},
          {"model", configuration_name(row.cell.encoder_ffn, row.cell.head)},
          {"metrics", metrics}};
}

}  // namespace abfr

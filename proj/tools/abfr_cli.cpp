#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "abfr/checkpoint.hpp"
#include "abfr/dataset.hpp"
#include "abfr/errors.hpp"
#include "abfr/metrics.hpp"
#include "abfr/stats.hpp"
#include "abfr/synthetic.hpp"
#include "abfr/train.hpp"
#include "config_json.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace abfr;
using abfr::cli::RunManifest;

namespace {

constexpr const char* kManifestKey = "run_manifest";

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw Error("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::malformed, path.string() + ": " + e.what());
  }
}

fs::path sibling_manifest(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

struct Invocation {
  std::vector<std::string> argv;
  std::string config_file;
};

// ---- shared model / training flags -------------------------------------

struct ModelFlags {
  std::string backbone = "vit";
  std::string configuration = "kan-kan";
  std::string fusion = "sum";
  bool no_kan_base = false;
  ModelConfig config;

  ModelConfig resolve() const {
    ModelConfig c = config;
    c.backbone = backbone_from_string(backbone);
    std::tie(c.encoder_ffn, c.head) = configuration_from_string(configuration);
    c.fusion = fusion_mode_from_string(fusion);
    c.kan_base_path = !no_kan_base;
    return c;
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& f, bool architecture) {
  if (architecture) {
    cmd->add_option("--backbone", f.backbone, "Transformer backbone")
        ->check(CLI::IsMember({"vit", "deit"}))
        ->capture_default_str();
    cmd->add_option("--config", f.configuration, "Encoder FFN and head: mlp-mlp, kan-kan, kan-mlp or mlp-kan")
        ->check(CLI::IsMember({"mlp-mlp", "kan-kan", "kan-mlp", "mlp-kan"}))
        ->capture_default_str();
  }
  cmd->add_option("--d-model", f.config.d_model, "Token width")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--depth", f.config.depth, "Encoder blocks")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--heads", f.config.n_heads, "Attention heads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--mlp-ratio", f.config.mlp_hidden_ratio, "MLP hidden width / d_model")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--kan-grid-size", f.config.kan_grid_size, "RSWAF knots per KAN edge")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--kan-grid-range", f.config.kan_grid_range, "Knots span [-r, r]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--kan-layers", f.config.kan_layers_per_block, "KAN layers per encoder block")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  cmd->add_flag("--no-kan-base", f.no_kan_base, "Drop the SiLU base path of KAN layers");
  cmd->add_option("--drop-path", f.config.drop_path_rate, "DropPath rate")
      ->check(CLI::Range(0.0, 0.999))
      ->capture_default_str();
  cmd->add_option("--fusion", f.fusion, "Token embedding fusion")
      ->check(CLI::IsMember({"sum", "concat"}))
      ->capture_default_str();
  cmd->add_option("--model-seed", f.config.seed, "Parameter initialisation seed")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainSpec& s, bool folds) {
  cmd->add_option("--epochs", s.epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--lr", s.learning_rate, "Adam learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--batch-size", s.batch_size, "Mini-batch size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", s.seed, "Shuffle, DropPath and fold-assignment seed")->capture_default_str();
  if (folds)
    cmd->add_option("--folds", s.folds, "Cross-validation folds")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1000}))
        ->capture_default_str();
}

void add_feature_inputs(RunManifest& m, const fs::path& where) {
  const auto index = fs::is_directory(where) ? where / kFeatureIndexName : where;
  m.add_input(index);
  for (const auto& s : read_json(index).at("subjects")) m.add_input(index.parent_path() / s.at("file").get<std::string>());
}

void print_summary(const Summary& s) {
  for (const auto& name : kMetricNames) {
    const auto& m = s.at(name);
    std::printf("  %-12s %.3f +- %.3f\n", name.c_str(), m.mean, m.std);
  }
}

// ---- gen-data ------------------------------------------------------------

struct GenDataOptions {
  SyntheticParams params;
  std::vector<std::size_t> dims{32, 16, 16, 16};
  fs::path out_dir;
};

void run_gen_data(const GenDataOptions& o, const Invocation& inv) {
  RunManifest manifest("gen-data", inv.argv, inv.config_file);
  SyntheticParams p = o.params;
  p.timepoints = o.dims[0];
  p.dims = {o.dims[1], o.dims[2], o.dims[3]};
  const auto cohort = generate_synthetic_cohort(p);
  const auto index = write_cohort(o.out_dir, cohort, {{kManifestKey, "manifest.json"}});
  manifest.parameters = to_json(p);
  manifest.seeds = {{"seed", p.seed}, {"structure_seed", p.structure_seed}};
  manifest.add_output(index);
  for (const auto& s : cohort.subjects) manifest.add_output(o.out_dir / (s.id + ".abfr"));
  manifest.write(o.out_dir / "manifest.json");
  std::size_t asd = 0;
  for (const auto& s : cohort.subjects) asd += s.label == kAsd;
  std::printf("wrote %zu subjects (%zu ASD) to %s\n", cohort.subjects.size(), asd, index.string().c_str());
}

// ---- extract -------------------------------------------------------------

struct ExtractCliOptions {
  fs::path cohort;
  std::string anchors = "random";
  std::string patching = "random";
  std::int64_t tau = -1;
  std::vector<std::size_t> stride;
  std::vector<std::size_t> offset{0, 0, 0};
  fs::path anchors_file;
  ExtractOptions opts;
  fs::path out;
};

void run_extract(const ExtractCliOptions& o, const Invocation& inv) {
  RunManifest manifest("extract", inv.argv, inv.config_file);
  ExtractOptions opts = o.opts;
  opts.anchors = anchor_method_from_string(o.anchors);
  opts.patching = patching_from_string(o.patching);
  if (o.tau >= 0) opts.tau = static_cast<std::size_t>(o.tau);
  if (!o.stride.empty()) opts.stride = Voxel{o.stride[0], o.stride[1], o.stride[2]};
  opts.offset = {o.offset[0], o.offset[1], o.offset[2]};
  opts.validate();

  const auto cohort_index = fs::is_directory(o.cohort) ? o.cohort / "cohort.json" : o.cohort;
  const auto cohort = read_cohort_manifest(cohort_index);
  if (cohort.subjects.empty()) throw ValidationError(cohort_index.string() + " lists no subjects");
  manifest.add_input(cohort_index);
  fs::create_directories(o.out);

  // Anchors are fixed for the whole dataset and placed on the first subject's
  // mask, unless another dataset's anchors.json is reused.
  AnchorSet anchors;
  if (!o.anchors_file.empty()) {
    anchors = anchor_set_from_json(read_json(o.anchors_file));
    manifest.add_input(o.anchors_file);
    opts.anchors = anchors.method;
  } else {
    anchors = select_anchors(read_volume(cohort.subjects.front().file).mask, opts);
  }
  write_json(o.out / "anchors.json", to_json(anchors));
  manifest.add_output(o.out / "anchors.json");

  std::vector<LabeledSample> samples;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& entry = cohort.subjects[i];
    const auto vol = read_volume(entry.file);
    manifest.add_input(entry.file);
    LabeledSample sample{entry.id, extract_subject(vol.volume, vol.mask, anchors, opts, i), entry.label};
    const auto file = o.out / feature_file_name(entry.id);
    write_representation(file, sample.rep,
                         {{kManifestKey, "manifest.json"},
                          {"subject_id", entry.id},
                          {"subject_index", i},
                          {"label", entry.label},
                          {"anchors", "anchors.json"}});
    manifest.add_output(file);
    samples.push_back(std::move(sample));
  }
  const json meta{{"sampling", to_string(opts.anchors)},
                  {"patching", to_string(opts.patching)},
                  {"extract", to_json(opts)},
                  {"cohort", cohort_index.string()},
                  {"anchors", "anchors.json"},
                  {kManifestKey, "manifest.json"}};
  manifest.add_output(write_feature_index(o.out, samples, meta));
  manifest.parameters = to_json(opts);
  manifest.seeds = {{"anchor_seed", opts.seed}, {"patch_seed", opts.seed}, {"subject_seed", "patch_seed ^ subject_index"}};
  manifest.write(o.out / "manifest.json");
  std::printf("extracted %zu subjects: %zu anchors, %zu tokens of width %zu -> %s\n", samples.size(),
              anchors.anchors.size(), samples.front().rep.n_rows, samples.front().rep.n_anchors, o.out.string().c_str());
}

// ---- train ---------------------------------------------------------------

struct TrainCliOptions {
  fs::path features;
  fs::path test_features;
  ModelFlags model;
  TrainSpec spec;
  fs::path out;
};

json predictions_json(const Predictions& p) { return {{"scores", p.scores}, {"labels", p.labels}}; }

void run_train(const TrainCliOptions& o, const Invocation& inv) {
  RunManifest manifest("train", inv.argv, inv.config_file);
  const auto train = load_feature_set(o.features);
  add_feature_inputs(manifest, o.features);
  ModelConfig config = o.model.resolve();
  config.n_anchors = train.front().rep.n_anchors;
  o.spec.validate();
  auto model = build_model(config);
  const auto outcome = train_one(model, train, o.spec);

  fs::create_directories(o.out);
  const auto ckpt = o.out / "model.ckpt.json";
  save_checkpoint(ckpt, model.parameters(),
                  {{"model_config", to_json(config)}, {"train_spec", to_json(o.spec)}, {kManifestKey, "manifest.json"}});
  manifest.add_output(ckpt);
  manifest.add_output(fs::path(ckpt.string() + ".bin"));

  const auto train_pred = predict(model, train);
  json result{{"format", "abfr-train-result"},
              {"model_config", to_json(config)},
              {"train_spec", to_json(o.spec)},
              {"n_parameters", count_parameters(model)},
              {"checkpoint", ckpt.filename().string()},
              {"train_loss_history", outcome.loss_history},
              {"train_metrics", to_json(compute_metrics(train_pred.scores, train_pred.labels))},
              {"train_predictions", predictions_json(train_pred)},
              {kManifestKey, "manifest.json"}};
  std::printf("trained %s-%s (%zu parameters) on %zu subjects, final loss %.4f\n", to_string(config.backbone).c_str(),
              config.configuration().c_str(), count_parameters(model), train.size(), outcome.loss_history.back());
  if (!o.test_features.empty()) {
    const auto test = load_feature_set(o.test_features);
    add_feature_inputs(manifest, o.test_features);
    const auto pred = predict(model, test);
    const auto report = compute_metrics(pred.scores, pred.labels);
    result["test_metrics"] = to_json(report);
    result["test_predictions"] = predictions_json(pred);
    std::printf("test: acc %.3f auc %.3f f1 %.3f\n", report.acc, report.auc, report.f1);
  }
  write_json(o.out / "metrics.json", result);
  manifest.add_output(o.out / "metrics.json");
  manifest.parameters = {{"model_config", to_json(config)}, {"train_spec", to_json(o.spec)}};
  manifest.seeds = {{"model_seed", config.seed}, {"shuffle_seed", o.spec.seed},
                    {"drop_path_seed", o.spec.seed ^ kDropPathStream}};
  manifest.write(o.out / "manifest.json");
}

// ---- cv ------------------------------------------------------------------

struct CvCliOptions {
  fs::path features;
  ModelFlags model;
  TrainSpec spec;
  bool no_checkpoints = false;
  fs::path out;
};

void run_cv(const CvCliOptions& o, const Invocation& inv) {
  RunManifest manifest("cv", inv.argv, inv.config_file);
  const auto data = load_feature_set(o.features);
  add_feature_inputs(manifest, o.features);
  ensure_parent(o.out);
  CvOptions cv_opts;
  if (!o.no_checkpoints) cv_opts.checkpoint_dir = fs::path(o.out.string() + ".ckpt");
  const auto result = cross_validate(data, o.model.resolve(), o.spec, cv_opts);

  auto j = to_json(result);
  j["features"] = o.features.string();
  j[kManifestKey] = sibling_manifest(o.out).filename().string();
  write_json(o.out, j);
  manifest.add_output(o.out);
  json fold_seeds = json::array();
  for (const auto& f : result.folds) {
    fold_seeds.push_back({{"model_seed", result.config.seed + f.fold_index}, {"shuffle_seed", o.spec.seed + f.fold_index}});
    if (!f.checkpoint.empty()) {
      manifest.add_output(f.checkpoint);
      manifest.add_output(f.checkpoint + ".bin");
    }
  }
  manifest.parameters = {{"model_config", to_json(result.config)}, {"train_spec", to_json(o.spec)}};
  manifest.seeds = {{"fold_assignment_seed", o.spec.seed}, {"folds", fold_seeds}};
  manifest.write(sibling_manifest(o.out));
  std::printf("%zu-fold CV of %s-%s on %zu subjects:\n", result.folds.size(), to_string(result.config.backbone).c_str(),
              result.config.configuration().c_str(), data.size());
  print_summary(result.summary);
}

// ---- grid ----------------------------------------------------------------

struct GridCliOptions {
  fs::path features_dir;
  std::vector<std::string> cells;
  ModelFlags model;
  TrainSpec spec;
  std::size_t jobs = 1;
  fs::path out;
};

void run_grid(const GridCliOptions& o, const Invocation& inv) {
  RunManifest manifest("grid", inv.argv, inv.config_file);
  if (o.out.extension() == ".json") throw ValidationError("--out names the CSV table; the JSON copy is written next to it");
  std::vector<GridCell> cells;
  if (o.cells.empty() || (o.cells.size() == 1 && o.cells[0] == "all"))
    cells = full_grid();
  else
    for (const auto& c : o.cells) cells.push_back(grid_cell_from_string(c));

  FeatureSets features;
  for (const auto& c : cells) {
    const auto key = c.feature_key();
    if (features.contains(key)) continue;
    features[key] = load_feature_set(o.features_dir / key);
    add_feature_inputs(manifest, o.features_dir / key);
  }

  ensure_parent(o.out);
  const fs::path cell_dir = o.out.string() + ".cells";
  fs::create_directories(cell_dir);
  const auto manifest_name = sibling_manifest(o.out).filename().string();
  std::vector<fs::path> cell_files;
  GridOptions grid_opts;
  grid_opts.jobs = o.jobs;
  grid_opts.on_cell_done = [&](const GridRow& row, const CvResult& result) {
    auto j = to_json(result);
    j["cell"] = row.cell.key();
    j[kManifestKey] = manifest_name;
    const auto path = cell_dir / (row.cell.key() + ".json");
    write_json(path, j);
    cell_files.push_back(path);
    std::printf("done %-32s acc %.3f auc %.3f\n", row.cell.key().c_str(), row.summary.at("acc").mean,
                row.summary.at("auc").mean);
    std::fflush(stdout);
  };
  const auto rows = run_experiment_grid(features, cells, o.model.resolve(), o.spec, grid_opts);

  write_grid_csv(o.out, rows);
  json table = json::array();
  for (const auto& r : rows) table.push_back(to_json(r));
  auto json_out = o.out;
  json_out.replace_extension(".json");
  write_json(json_out, {{"format", "abfr-grid-result"}, {"rows", table}, {kManifestKey, manifest_name}});
  manifest.add_output(o.out);
  manifest.add_output(json_out);
  std::sort(cell_files.begin(), cell_files.end());
  for (const auto& f : cell_files) manifest.add_output(f);
  manifest.parameters = {{"base_model_config", to_json(o.model.resolve())},
                         {"train_spec", to_json(o.spec)},
                         {"cells", [&] {
                            json k = json::array();
                            for (const auto& c : cells) k.push_back(c.key());
                            return k;
                          }()},
                         {"jobs", o.jobs}};
  manifest.seeds = {{"fold_assignment_seed", o.spec.seed},
                    {"model_seed", o.model.config.seed},
                    {"per_fold", "model_seed + fold, shuffle seed + fold"}};
  manifest.write(sibling_manifest(o.out));
  std::printf("wrote %zu rows to %s\n", rows.size(), o.out.string().c_str());
}

// ---- roc / stats -----------------------------------------------------------

// Pooled held-out predictions of a cv, grid-cell or train result.
Predictions result_predictions(const json& j, const fs::path& path) {
  Predictions p;
  const auto format = j.value("format", "");
  if (format == "abfr-cv-result") {
    for (const auto& f : j.at("folds")) {
      for (double s : f.at("scores")) p.scores.push_back(s);
      for (int l : f.at("labels")) p.labels.push_back(l);
    }
  } else if (format == "abfr-train-result") {
    const auto& pred = j.contains("test_predictions") ? j.at("test_predictions") : j.at("train_predictions");
    p.scores = pred.at("scores").get<std::vector<double>>();
    p.labels = pred.at("labels").get<std::vector<int>>();
  } else {
    throw ParseError(ParseErrorKind::bad_magic, path.string() + " is not a cv, grid-cell or train result");
  }
  return p;
}

std::string result_name(const json& j) {
  const auto c = model_config_from_json(j.at("model_config"));
  auto name = to_string(c.backbone) + "-" + c.configuration();
  if (j.contains("cell")) name = j.at("cell").get<std::string>();
  return name;
}

struct RocCliOptions {
  std::vector<fs::path> results;
  std::vector<std::string> names;
  fs::path out;
};

void run_roc(const RocCliOptions& o, const Invocation& inv) {
  RunManifest manifest("roc", inv.argv, inv.config_file);
  if (!o.names.empty() && o.names.size() != o.results.size())
    throw ValidationError("--names needs one name per --results file");
  std::vector<NamedRoc> curves;
  std::set<std::string> used;
  for (std::size_t i = 0; i < o.results.size(); ++i) {
    const auto j = read_json(o.results[i]);
    manifest.add_input(o.results[i]);
    const auto pred = result_predictions(j, o.results[i]);
    auto name = o.names.empty() ? result_name(j) : o.names[i];
    if (used.contains(name)) name = o.results[i].stem().string();
    used.insert(name);
    curves.push_back({name, roc_curve(pred.scores, pred.labels)});
    std::printf("%-32s auc %.4f\n", name.c_str(), auc(pred.scores, pred.labels));
  }
  ensure_parent(o.out);
  export_roc(curves, o.out);
  manifest.add_output(o.out);
  manifest.parameters = {{"results", o.results}, {"names", o.names}};
  manifest.write(sibling_manifest(o.out));
}

struct StatsCliOptions {
  std::vector<fs::path> results;
  std::vector<std::string> groups;
  std::string metric = "acc";
  double alpha = 0.05;
  fs::path out;
};

void run_stats(const StatsCliOptions& o, const Invocation& inv) {
  RunManifest manifest("stats", inv.argv, inv.config_file);
  if (!o.groups.empty() && o.groups.size() != o.results.size())
    throw ValidationError("--groups needs one label per --results file");
  // Files that share a label are pooled into one group; groups keep first-seen order.
  std::vector<std::string> names;
  std::map<std::string, std::vector<double>> values;
  for (std::size_t i = 0; i < o.results.size(); ++i) {
    const auto j = read_json(o.results[i]);
    manifest.add_input(o.results[i]);
    if (j.value("format", "") != "abfr-cv-result")
      throw ParseError(ParseErrorKind::bad_magic, o.results[i].string() + " is not a cv or grid-cell result");
    const auto label = o.groups.empty() ? o.results[i].stem().string() : o.groups[i];
    if (!values.contains(label)) names.push_back(label);
    for (const auto& f : j.at("folds"))
      values[label].push_back(metric_value(metrics_report_from_json(f.at("metrics")), o.metric));
  }
  std::vector<std::vector<double>> groups;
  for (const auto& n : names) groups.push_back(values[n]);
  const auto kw = kruskal_wallis(groups);
  const auto dunn = dunn_test(groups, o.alpha);

  json group_json = json::array();
  for (std::size_t g = 0; g < names.size(); ++g) group_json.push_back({{"name", names[g]}, {"values", groups[g]}});
  json pairs = json::array();
  for (const auto& p : dunn) {
    auto pj = to_json(p);
    pj["a_name"] = names[p.a];
    pj["b_name"] = names[p.b];
    pairs.push_back(pj);
  }
  ensure_parent(o.out);
  write_json(o.out, {{"format", "abfr-stats-report"},
                     {"metric", o.metric},
                     {"alpha", o.alpha},
                     {"groups", group_json},
                     {"kruskal_wallis", to_json(kw)},
                     {"dunn", pairs},
                     {kManifestKey, sibling_manifest(o.out).filename().string()}});
  manifest.add_output(o.out);
  manifest.parameters = {{"metric", o.metric}, {"alpha", o.alpha}, {"groups", names}};
  manifest.write(sibling_manifest(o.out));
  std::printf("Kruskal-Wallis on %s: H = %.4f, df = %zu, p = %.4g\n", o.metric.c_str(), kw.h, kw.df, kw.p_value);
  for (const auto& p : dunn)
    std::printf("  %s vs %s: z = %.3f, p_adj = %.4g%s\n", names[p.a].c_str(), names[p.b].c_str(), p.z, p.p_adjusted,
                p.significant ? " *" : "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ABFR-KAN pipeline: synthetic data, feature extraction, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<cli::ConfigJson>());
  Invocation inv;
  inv.argv.assign(argv, argv + argc);
  app.set_config("--config-file", "", "JSON file with flag values; command-line flags win");

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic labelled fMRI cohort");
  gen_cmd->add_option("--subjects", gen.params.n_subjects, "Number of subjects")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}))
      ->capture_default_str();
  gen_cmd->add_option("--dims", gen.dims, "T X Y Z")->expected(4)->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--effect-size", gen.params.effect_size, "Class separation")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.params.seed, "Subject seed")->capture_default_str();
  gen_cmd->add_option("--structure-seed", gen.params.structure_seed, "Class-structure seed shared by matched cohorts")
      ->capture_default_str();
  gen_cmd->add_option("--noise-std", gen.params.noise_std, "Voxel noise")->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--jitter", gen.params.subject_jitter, "Per-subject weight jitter")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  gen_cmd->add_option("--asd-fraction", gen.params.asd_fraction, "Fraction of ASD subjects")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_cmd->add_option("--latent", gen.params.n_latent_signals, "Latent signals per subject")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--regions", gen.params.regions_per_axis, "Regions per axis")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();

  ExtractCliOptions ext;
  auto* ext_cmd = app.add_subcommand("extract", "Select anchors and build per-subject function representations");
  ext_cmd->add_option("--cohort", ext.cohort, "cohort.json or its directory")->required();
  ext_cmd->add_option("--anchors", ext.anchors, "Anchor selection")
      ->check(CLI::IsMember({"grid", "random"}))
      ->capture_default_str();
  ext_cmd->add_option("--patching", ext.patching, "Patch sampling")
      ->check(CLI::IsMember({"random", "iterative"}))
      ->capture_default_str();
  ext_cmd->add_option("--anchor-size", ext.opts.anchor_size, "Anchor cube edge")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ext_cmd->add_option("--n-anchors", ext.opts.n_anchors, "Random anchors to place")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ext_cmd->add_option("--tau", ext.tau, "Minimum gray-matter voxels per anchor (default: half the cube for random, 0 for grid)");
  ext_cmd->add_option("--stride", ext.stride, "Grid stride X Y Z (default: anchor size)")->expected(3)->check(CLI::PositiveNumber);
  ext_cmd->add_option("--offset", ext.offset, "Grid offset X Y Z")->expected(3)->capture_default_str();
  ext_cmd->add_option("--anchors-file", ext.anchors_file, "Reuse the anchors.json of another feature set")
      ->check(CLI::ExistingFile);
  ext_cmd->add_option("--patch-size", ext.opts.patch_size, "Patch edge for random patching")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ext_cmd->add_option("--sizes", ext.opts.sizes, "Patch edges for iterative patching, one pass each")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ext_cmd->add_option("--n-patches", ext.opts.n_patches, "Patches per pass")->check(CLI::PositiveNumber)->capture_default_str();
  ext_cmd->add_option("--seed", ext.opts.seed, "Anchor and patch seed")->capture_default_str();
  ext_cmd->add_option("--max-attempts", ext.opts.max_attempts, "Draws per anchor or patch before giving up")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ext_cmd->add_option("--out", ext.out, "Output directory")->required();

  TrainCliOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model on a feature set");
  train_cmd->add_option("--features", tr.features, "Feature set directory")->required();
  train_cmd->add_option("--test-features", tr.test_features, "Evaluate on this feature set (cross-cohort)");
  add_model_flags(train_cmd, tr.model, true);
  add_train_flags(train_cmd, tr.spec, false);
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  CvCliOptions cv;
  auto* cv_cmd = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  cv_cmd->add_option("--features", cv.features, "Feature set directory")->required();
  add_model_flags(cv_cmd, cv.model, true);
  add_train_flags(cv_cmd, cv.spec, true);
  cv_cmd->add_flag("--no-checkpoints", cv.no_checkpoints, "Skip per-fold checkpoints");
  cv_cmd->add_option("--out", cv.out, "Result JSON")->required();

  GridCliOptions grid;
  auto* grid_cmd = app.add_subcommand("grid", "Cross-validate every sampling x patching x backbone x configuration cell");
  grid_cmd->add_option("--features-dir", grid.features_dir,
                       "Directory with one feature set per <sampling>-<patching>, e.g. random-iterative/")
      ->required();
  grid_cmd->add_option("--cells", grid.cells, "Cells like grid-random-deit-kan-mlp, or 'all'");
  add_model_flags(grid_cmd, grid.model, false);
  add_train_flags(grid_cmd, grid.spec, true);
  grid_cmd->add_option("--jobs", grid.jobs, "Cells trained in parallel")->check(CLI::PositiveNumber)->capture_default_str();
  grid_cmd->add_option("--out", grid.out, "Result table CSV")->required();

  RocCliOptions roc;
  auto* roc_cmd = app.add_subcommand("roc", "Export ROC curves of cv, grid-cell or train results");
  roc_cmd->add_option("--results", roc.results, "Result JSON files")->required();
  roc_cmd->add_option("--names", roc.names, "Curve names, one per result");
  roc_cmd->add_option("--out", roc.out, "ROC CSV")->required();

  StatsCliOptions st;
  auto* stats_cmd = app.add_subcommand("stats", "Kruskal-Wallis and Dunn tests over per-fold metrics");
  stats_cmd->add_option("--results", st.results, "cv or grid-cell result files")->required();
  stats_cmd->add_option("--groups", st.groups, "Group label per result file; equal labels pool");
  stats_cmd->add_option("--metric", st.metric, "Metric compared")->check(CLI::IsMember(kMetricNames))->capture_default_str();
  stats_cmd->add_option("--alpha", st.alpha, "Significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  stats_cmd->add_option("--out", st.out, "Report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "abfr: usage error: %s\n", e.what());
    return 2;
  }
  if (auto* cfg = app.get_config_ptr(); cfg && cfg->count() > 0) inv.config_file = cfg->as<std::string>();

  try {
    if (*gen_cmd) run_gen_data(gen, inv);
    if (*ext_cmd) run_extract(ext, inv);
    if (*train_cmd) run_train(tr, inv);
    if (*cv_cmd) run_cv(cv, inv);
    if (*grid_cmd) run_grid(grid, inv);
    if (*roc_cmd) run_roc(roc, inv);
    if (*stats_cmd) run_stats(st, inv);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "abfr: error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}

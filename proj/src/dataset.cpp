#include "abfr/dataset.hpp"

#include <fstream>

#include "abfr/errors.hpp"

namespace abfr {

std::string to_string(Patching p) { return p == Patching::random ? "random" : "iterative"; }

Patching patching_from_string(const std::string& s) {
  if (s == "random") return Patching::random;
  if (s == "iterative") return Patching::iterative;
  throw ValidationError("unknown patching '" + s + "' (expected random or iterative)");
}

std::size_t ExtractOptions::resolved_tau() const {
  if (tau) return *tau;
  return anchors == AnchorMethod::random ? default_tau(anchor_size) : 0;
}

void ExtractOptions::validate() const {
  if (anchor_size < 1) throw ValidationError("anchor size must be at least 1");
  if (anchors == AnchorMethod::random && n_anchors < 1) throw ValidationError("n_anchors must be at least 1");
  if (n_patches < 1) throw ValidationError("n_patches must be at least 1");
  if (patching == Patching::random && patch_size < 1) throw ValidationError("patch size must be at least 1");
  if (patching == Patching::iterative) {
    if (sizes.empty()) throw ValidationError("iterative patching needs at least one size");
    for (auto s : sizes)
      if (s < 1) throw ValidationError("patch sizes must be at least 1");
  }
  if (max_attempts < 1) throw ValidationError("max_attempts must be at least 1");
}

nlohmann::json to_json(const ExtractOptions& o) {
  nlohmann::json j{{"anchors", to_string(o.anchors)},
                   {"patching", to_string(o.patching)},
                   {"anchor_size", o.anchor_size},
                   {"n_anchors", o.n_anchors},
                   {"tau", o.resolved_tau()},
                   {"offset", o.offset},
                   {"patch_size", o.patch_size},
                   {"sizes", o.sizes},
                   {"n_patches", o.n_patches},
                   {"seed", o.seed},
                   {"max_attempts", o.max_attempts}};
  j["stride"] = o.stride.value_or(Voxel{o.anchor_size, o.anchor_size, o.anchor_size});
  return j;
}

ExtractOptions extract_options_from_json(const nlohmann::json& j) {
  ExtractOptions o;
  o.anchors = anchor_method_from_string(j.value("anchors", to_string(o.anchors)));
  o.patching = patching_from_string(j.value("patching", to_string(o.patching)));
  o.anchor_size = j.value("anchor_size", o.anchor_size);
  o.n_anchors = j.value("n_anchors", o.n_anchors);
  if (j.contains("tau")) o.tau = j.at("tau").get<std::size_t>();
  if (j.contains("stride")) o.stride = j.at("stride").get<Voxel>();
  o.offset = j.value("offset", o.offset);
  o.patch_size = j.value("patch_size", o.patch_size);
  o.sizes = j.value("sizes", o.sizes);
  o.n_patches = j.value("n_patches", o.n_patches);
  o.seed = j.value("seed", o.seed);
  o.max_attempts = j.value("max_attempts", o.max_attempts);
  return o;
}

AnchorSet select_anchors(const GrayMatterMask& mask, const ExtractOptions& options) {
  options.validate();
  if (options.anchors == AnchorMethod::grid) {
    const auto p = options.anchor_size;
    return grid_anchor_selection(mask, p, options.stride.value_or(Voxel{p, p, p}), options.offset,
                                 options.resolved_tau());
  }
  return random_anchor_selection(mask, options.anchor_size, options.n_anchors, options.resolved_tau(), options.seed,
                                 options.max_attempts);
}

FunctionRepresentation extract_subject(const FmriVolume& volume, const GrayMatterMask& mask, const AnchorSet& anchors,
                                       const ExtractOptions& options, std::size_t subject_index) {
  options.validate();
  const std::uint64_t seed = options.seed ^ static_cast<std::uint64_t>(subject_index);
  const SamplingOptions sampling{options.max_attempts};
  if (options.patching == Patching::random)
    return random_sampling_representation(volume, mask, anchors, options.n_patches, options.patch_size, seed, sampling);
  return iterative_sampling_representation(volume, mask, anchors, options.n_patches, options.sizes, seed, sampling);
}

std::filesystem::path feature_file_name(const std::string& id) { return id + ".feat"; }

std::filesystem::path write_feature_index(const std::filesystem::path& dir, std::span<const LabeledSample> samples,
                                          const nlohmann::json& meta) {
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : samples)
    subjects.push_back({{"id", s.id}, {"file", feature_file_name(s.id).string()}, {"label", s.label}});
  const auto path = dir / kFeatureIndexName;
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << nlohmann::json{{"format", "abfr-feature-set"}, {"version", 1}, {"meta", meta}, {"subjects", subjects}}.dump(2)
     << '\n';
  if (!os) throw Error("write failed for " + path.string());
  return path;
}

std::vector<LabeledSample> load_feature_set(const std::filesystem::path& where, nlohmann::json* meta) {
  const auto index = std::filesystem::is_directory(where) ? where / kFeatureIndexName : where;
  std::ifstream is(index);
  if (!is) throw ParseError(ParseErrorKind::io, "cannot open feature index " + index.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::malformed, index.string() + ": " + e.what());
  }
  if (j.value("format", "") != "abfr-feature-set")
    throw ParseError(ParseErrorKind::bad_magic, index.string() + " is not a feature set index");
  if (meta) *meta = j.value("meta", nlohmann::json::object());
  std::vector<LabeledSample> out;
  for (const auto& s : j.at("subjects")) {
    LabeledSample sample;
    sample.id = s.at("id").get<std::string>();
    sample.label = s.at("label").get<int>();
    sample.rep = read_representation(index.parent_path() / s.at("file").get<std::string>());
    out.push_back(std::move(sample));
  }
  if (out.empty()) throw ValidationError(index.string() + " lists no subjects");
  return out;
}

}  // namespace abfr

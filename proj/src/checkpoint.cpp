#include "abfr/checkpoint.hpp"

#include <fstream>

#include "abfr/binary_io.hpp"
#include "abfr/errors.hpp"

namespace abfr {

namespace {

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p += ".bin";
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> params,
                     const nlohmann::json& extra) {
  nlohmann::json manifest;
  manifest["format"] = "abfr-checkpoint";
  manifest["version"] = 1;
  manifest["dtype"] = "float64-le";
  manifest["blob"] = blob_path(path).filename().string();
  manifest["meta"] = extra;
  auto& entries = manifest["tensors"] = nlohmann::json::array();

  std::ofstream blob(blob_path(path), std::ios::binary);
  if (!blob) throw Error("cannot write " + blob_path(path).string());
  std::size_t offset = 0;
  for (const auto& p : params) {
    entries.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}, {"count", p.tensor.numel()}});
    for (double v : p.tensor.data()) io::write_f64(blob, v);
    offset += p.tensor.numel();
  }
  if (!blob) throw Error("write failed for " + blob_path(path).string());

  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::io, "cannot open checkpoint " + path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::malformed, "checkpoint manifest " + path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "abfr-checkpoint")
    throw ParseError(ParseErrorKind::bad_magic, path.string() + " is not a checkpoint manifest");
  if (meta) *meta = manifest.value("meta", nlohmann::json::object());

  const auto blob_file = path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream blob(blob_file, std::ios::binary);
  if (!blob) throw ParseError(ParseErrorKind::io, "cannot open checkpoint blob " + blob_file.string());

  std::vector<NamedTensor> out;
  for (const auto& e : manifest.at("tensors")) {
    const auto shape = e.at("shape").get<Shape>();
    const auto count = e.at("count").get<std::size_t>();
    if (shape_numel(shape) != count)
      throw ParseError(ParseErrorKind::malformed, "tensor " + e.at("name").get<std::string>() + " count mismatch");
    std::vector<double> values(count);
    for (auto& v : values)
      if (!io::read_f64(blob, v)) throw ParseError(ParseErrorKind::truncated, "checkpoint blob truncated");
    out.push_back({e.at("name").get<std::string>(), Tensor(shape, std::move(values))});
  }
  return out;
}

void load_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> params) {
  const auto stored = read_checkpoint(path);
  if (stored.size() != params.size())
    throw ValidationError("checkpoint holds " + std::to_string(stored.size()) + " tensors, model has " +
                          std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (stored[i].name != params[i].name || stored[i].tensor.shape() != params[i].tensor.shape())
      throw ValidationError("checkpoint tensor " + stored[i].name + shape_string(stored[i].tensor.shape()) +
                            " does not match " + params[i].name + shape_string(params[i].tensor.shape()));
    auto dst = params[i].tensor.mutable_data();
    auto src = stored[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace abfr

#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "abfr/errors.hpp"

namespace abfr::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  std::array<char, 1 << 16> buf;
  while (is) {
    is.read(buf.data(), buf.size());
    if (is.gcount() > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(is.gcount())) != 1)
      throw Error("SHA-256 update failed");
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw Error("SHA-256 final failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
  return hex.str();
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv, std::string config_file)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      config_file_(std::move(config_file)),
      start_(std::chrono::steady_clock::now()) {}

void RunManifest::write(const std::filesystem::path& path) const {
  auto digests = [](const std::vector<std::filesystem::path>& files) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : files) out.push_back({{"path", f.string()}, {"sha256", sha256_file(f)}});
    return out;
  };
  nlohmann::json j{{"format", "abfr-run-manifest"},
                   {"version", 1},
                   {"command", command_},
                   {"argv", argv_},
                   {"config_file", config_file_.empty() ? nlohmann::json(nullptr) : nlohmann::json(config_file_)},
                   {"parameters", parameters},
                   {"seeds", seeds},
                   {"inputs", digests(inputs_)},
                   {"outputs", digests(outputs_)}};
  j["duration_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw Error("write failed for " + path.string());
}

}  // namespace abfr::cli

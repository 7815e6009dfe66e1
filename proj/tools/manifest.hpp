#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace abfr::cli {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Everything needed to replay a command: argv, config file, resolved
// parameters, seeds and the digests of what it read and wrote. The wall-clock
// duration lives only here so the outputs themselves stay bit-identical.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv, std::string config_file);

  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();

  void add_input(const std::filesystem::path& p) { inputs_.push_back(p); }
  void add_output(const std::filesystem::path& p) { outputs_.push_back(p); }

  // Hashes inputs and outputs and writes the manifest to `path`.
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string config_file_;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace abfr::cli

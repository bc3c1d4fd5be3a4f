#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rcabs/config.hpp"

namespace rcabs {

std::string sha256_hex(std::string_view bytes);
/// Throws IoError if the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Per-run record: resolved config, seeds, versions, stage wall times and
/// every output file with its SHA-256. Stage times live under "timing"; all
/// other fields are a pure function of the invocation.
class RunManifest {
 public:
  RunManifest(std::string command, const RunConfig& cfg, std::filesystem::path out_dir);

  void add_seed(std::uint64_t seed);
  void add_stage(const std::string& name, double seconds);
  /// name is relative to out_dir; the file is digested when the manifest is written.
  void add_output(const std::filesystem::path& name);
  void set_result(const std::string& key, nlohmann::json value);
  void set_error(const std::string& kind, const std::string& message, int exit_code);

  nlohmann::json to_json() const;
  /// Writes <out_dir>/manifest_<command>.json atomically and returns its path.
  std::filesystem::path write() const;

 private:
  std::string command_;
  std::filesystem::path out_dir_;
  nlohmann::json config_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::pair<std::string, double>> stages_;
  std::vector<std::filesystem::path> outputs_;
  nlohmann::json results_ = nlohmann::json::object();
  nlohmann::json error_;
};

class StageTimer {
 public:
  StageTimer(RunManifest& manifest, std::string name);
  ~StageTimer();
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;

 private:
  RunManifest& manifest_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace rcabs

#include "rcabs/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <unistd.h>

#include <openssl/evp.h>

#include "rcabs/errors.hpp"

namespace rcabs {
namespace {

namespace fs = std::filesystem;

struct DigestContext {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

  DigestContext() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 init failed");
  }
  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx.get(), data, size) != 1) throw IoError("sha256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw IoError("sha256 final failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return out.str();
  }
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  DigestContext d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  DigestContext d;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  if (in.bad()) throw IoError("failed reading " + path.string());
  return d.hex();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.close();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

RunManifest::RunManifest(std::string command, const RunConfig& cfg, fs::path out_dir)
    : command_(std::move(command)), out_dir_(std::move(out_dir)), config_(nlohmann::json::object()) {
  for (const auto& [key, value] : describe(cfg)) config_[key] = value;
}

void RunManifest::add_seed(std::uint64_t seed) { seeds_.push_back(seed); }

void RunManifest::add_stage(const std::string& name, double seconds) { stages_.emplace_back(name, seconds); }

void RunManifest::add_output(const fs::path& name) {
  if (name.is_absolute() || name.empty()) throw ContractViolation("manifest outputs are names relative to the output directory");
  for (const auto& p : outputs_) {
    if (p == name) return;
  }
  outputs_.push_back(name);
}

void RunManifest::set_result(const std::string& key, nlohmann::json value) { results_[key] = std::move(value); }

void RunManifest::set_error(const std::string& kind, const std::string& message, int exit_code) {
  error_ = {{"kind", kind}, {"message", message}, {"exit_code", exit_code}};
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command_;
  j["artifact_version"] = RCABS_VERSION;
  j["format_version"] = RCABS_FORMAT_VERSION;
  j["config"] = config_;
  j["seeds"] = seeds_;
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& rel : outputs_) {
    const fs::path full = out_dir_ / rel;
    outputs.push_back({{"path", rel.generic_string()},
                       {"bytes", static_cast<std::uint64_t>(fs::file_size(full))},
                       {"sha256", sha256_file(full)}});
  }
  j["outputs"] = outputs;
  j["results"] = results_;
  j["status"] = error_.is_null() ? "ok" : "error";
  if (!error_.is_null()) j["error"] = error_;
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& [name, seconds] : stages_) timing[name] = seconds;
  j["timing"] = timing;
  return j;
}

fs::path RunManifest::write() const {
  nlohmann::json j;
  try {
    j = to_json();
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
  const fs::path path = out_dir_ / ("manifest_" + command_ + ".json");
  write_file_atomic(path, j.dump(2) + "\n");
  return path;
}

StageTimer::StageTimer(RunManifest& manifest, std::string name)
    : manifest_(manifest), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

StageTimer::~StageTimer() {
  manifest_.add_stage(name_, std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
}

}  // namespace rcabs

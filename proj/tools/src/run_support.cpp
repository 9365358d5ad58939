#include "run_support.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

namespace ssad::tools {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".ssad.lock") {
  std::filesystem::create_directories(dir);
  std::FILE* f = std::fopen(path_.string().c_str(), "wx");
  if (f == nullptr) {
    throw Error("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
  }
  std::fclose(f);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

void prepare_output_dir(const std::filesystem::path& dir, bool force) {
  if (std::filesystem::exists(dir)) {
    if (!std::filesystem::is_directory(dir)) throw UsageError("output path " + dir.string() + " is not a directory");
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().filename() == ".ssad.lock") continue;
      if (!force) throw UsageError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
      break;
    }
  }
  std::filesystem::create_directories(dir);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},        {"config_path", config_path}, {"config_hash", config_hash},
          {"config", config},          {"seed", seed},               {"output_dir", output_dir.string()},
          {"argv", argv},              {"started_at", started_at},   {"finished_at", finished_at}};
}

void RunManifest::write() const {
  std::ofstream out(output_dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error("cannot write manifest in " + output_dir.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace ssad::tools

#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ssad/tensor.hpp"

namespace ssad::tools {

/// Bad flags, bad config values, refused overwrites: exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string sha256_hex(const std::string& data);

/// Exclusive `.ssad.lock` in a directory, removed on destruction.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Creates `dir`. An existing non-empty directory is refused unless `force`.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

/// Written once per artifact-producing command as manifest.json.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::vector<std::string> argv;
  std::string started_at;
  std::string finished_at;

  nlohmann::json to_json() const;
  void write() const;
};

std::string utc_timestamp();

}  // namespace ssad::tools

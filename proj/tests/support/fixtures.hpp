#pragma once

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "ssad/config.hpp"
#include "ssad/data.hpp"
#include "ssad/trainer.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ssad") {
    std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    do {
      path_ = base / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    } while (std::filesystem::exists(path_));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(read_file(p)); }

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Small, fast training configuration for 64x64 images.
inline ssad::TrainConfig tiny_config(int epochs = 2) {
  ssad::TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.image_size = 64;
  c.mask_patch = 16;
  c.lr_drop_epochs = {};
  c.encoder_widths = {4, 8, 8, 16};
  c.encoder_out = 16;
  c.decoder_hidden1 = 8;
  c.decoder_hidden2 = 4;
  c.detector_hidden = 8;
  return c;
}

inline ssad::ImageDataset tiny_dataset(int n = 8, int size = 64, std::uint64_t seed = 3) {
  return ssad::synthesize_toy_dataset(n, size, 3, seed);
}

inline std::filesystem::path source_dir() { return SSAD_SOURCE_DIR; }

}  // namespace fixtures

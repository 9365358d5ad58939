#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ssad/data.hpp"

namespace ssad {

enum class Paradigm { ssad, detection_only, ssl_then_ft };

std::string_view to_string(Paradigm p);
Paradigm parse_paradigm(std::string_view s);

struct LossWeights {
  double recon = 1.0;
  double tc = 1.0;
  double cls = 1.0;
  double reg = 1.0;

  bool reconstruction_active() const { return recon != 0.0 || tc != 0.0; }
  bool detection_active() const { return cls != 0.0 || reg != 0.0; }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double mask_rate = 0.6;
  int image_size = 512;
  int mask_patch = 32;
  MaskFill mask_fill = MaskFill::zero;
  LossWeights weights;
  double lr_det = 1e-3;
  double lr_recon = 1e-4;
  std::vector<int> lr_drop_epochs{26, 72};
  double lr_drop_factor = 0.1;
  double weight_decay = 1e-2;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  Paradigm paradigm = Paradigm::ssad;
  /// Self-supervised phase length for ssl_then_ft; 0 means `epochs`.
  int ssl_epochs = 0;
  /// Separate detection and reconstruction updates per batch instead of one
  /// combined backward pass.
  bool alternating_updates = false;
  bool horizontal_flip = false;
  std::string extractor = "toy_conv";
  bool tc_gather_on_normalized = false;

  std::vector<int> encoder_widths{8, 16, 32, 64};
  int encoder_out = 64;
  int decoder_hidden1 = 32;
  int decoder_hidden2 = 16;
  int detector_hidden = 64;

  /// Throws Error naming the first violated invariant.
  void validate() const;
  int phase1_epochs() const { return ssl_epochs > 0 ? ssl_epochs : epochs; }
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct SynthConfig {
  int n_train = 500;
  int n_test = 100;
  int image_size = 128;
  int n_categories = 3;

  void validate() const;
  nlohmann::json to_json() const;
};

struct DataConfig {
  std::string train_annotations = "train.json";
  std::string test_annotations = "test.json";
  std::string image_root;  // empty: the annotation file's directory
  Task task = Task::disease;

  nlohmann::json to_json() const;
};

struct EvalConfig {
  double score_threshold = 0.05;
  double nms_iou = 0.5;
  double confusion_threshold = 0.5;

  void validate() const;
  nlohmann::json to_json() const;
};

struct CompareConfig {
  std::vector<int> seeds{0};
  std::vector<std::string> paradigms{"ssad", "detection_only", "ssl_then_ft"};
  bool tc_ablation = true;
  std::vector<std::string> extractors{"toy_conv", "gabor_bank", "pixel_pool", "sam_vit_b", "clip_vit_b32",
                                      "medsam_vit_b"};

  nlohmann::json to_json() const;
};

/// Everything a config file can set. Sections: [synth], [data], [train],
/// [loss], [optim], [model], [eval], [compare].
struct RunConfig {
  SynthConfig synth;
  DataConfig data;
  TrainConfig train;
  EvalConfig eval;
  CompareConfig compare;

  nlohmann::json to_json() const;
  void validate() const;
};

/// Thrown for unknown sections/keys and unparsable values; the message names
/// the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

RunConfig parse_run_config(const std::string& ini_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// INI text that parses back to `config`.
std::string to_ini(const RunConfig& config);

}  // namespace ssad

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ssad/config.hpp"
#include "ssad/detection.hpp"
#include "ssad/optim.hpp"
#include "ssad/reconstruction.hpp"
#include "ssad/texture.hpp"

namespace ssad {

/// Per-step (or per-epoch mean) loss components. A component is empty when
/// its branch did not run.
struct LossBundle {
  std::optional<double> recon;
  std::optional<double> tc_align;
  std::optional<double> tc_gather;
  std::optional<double> det_cls;
  std::optional<double> det_reg;
  double total = 0.0;

  /// Weighted sum of the present components.
  static double weighted_total(const LossBundle& b, const LossWeights& w);
  nlohmann::json to_json() const;
  friend bool operator==(const LossBundle&, const LossBundle&) = default;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Branches around one shared encoder. `reconstruction` is null for
/// detection-only models, `extractor` is null when the texture loss is off.
struct SsadModel {
  EncoderHandle encoder;
  std::shared_ptr<ReconstructionBranch> reconstruction;
  DetectorHandle detector;
  ExtractorHandle extractor;
  int in_channels = 1;
  std::vector<std::string> category_names;
};

/// Seeds for the encoder, decoder and heads are all derived from config.seed.
SsadModel build_model(const TrainConfig& config, int n_categories, int in_channels = 1);

struct TrainSample {
  const ImageBuffer* image = nullptr;
  const AnnotationRecord* record = nullptr;
};

/// Encoder, decoder and head parameters, each once.
ParameterList all_parameters(const SsadModel& m);

/// Stable per-(seed, epoch, image) mask seed.
std::uint64_t mask_seed(std::uint64_t run_seed, int epoch, std::int64_t image_id);

struct RecordedLoss {
  LossBundle components;
  /// Weighted total on the tape; invalid when every active weight is zero.
  Var total;
};

/// Records one image's training losses on `tape` exactly as train_step does:
/// the detection pass on the clean image, the reconstruction pass on the
/// masked image drawn for (config.seed, epoch, image id).
RecordedLoss record_losses(Tape& tape, const SsadModel& model, const TrainConfig& config, const TrainSample& sample,
                           int epoch, bool detection, bool reconstruction);

class Trainer {
 public:
  Trainer(SsadModel model, TrainConfig config);

  const SsadModel& model() const noexcept { return model_; }
  const TrainConfig& config() const noexcept { return config_; }

  double lr_det(int epoch) const;
  double lr_recon(int epoch) const;

  /// Forward on the masked and the clean image of every sample, one combined
  /// backward of the weighted total (batch mean), then one update per
  /// parameter group. `epoch` is 1-based. Returns batch-mean components.
  LossBundle train_step(std::span<const TrainSample> batch, int epoch);

  /// Seeded shuffle of `data` into batches for one epoch.
  std::vector<std::vector<TrainSample>> epoch_batches(const ImageDataset& data);

  /// Parameters, optimizer state and RNG state.
  void save_checkpoint(const std::filesystem::path& path, int epoch, const std::string& phase) const;
  /// Restores a checkpoint written by save_checkpoint into this trainer;
  /// returns the completed epoch.
  int load_checkpoint(const std::filesystem::path& path);

 private:
  LossBundle image_pass(const TrainSample& sample, int epoch, bool detection, bool reconstruction, double scale);
  void check_finite(const LossBundle& b, const TrainSample& s, int epoch) const;

  SsadModel model_;
  TrainConfig config_;
  std::unique_ptr<AdamW> encoder_opt_;
  std::unique_ptr<AdamW> head_opt_;
  std::unique_ptr<Sgd> decoder_opt_;
  std::mt19937_64 shuffle_rng_;
  std::mt19937_64 augment_rng_;
};

struct EpochLog {
  std::string phase;
  int epoch = 0;
  double lr_det = 0.0;
  double lr_recon = 0.0;
  LossBundle mean;
  int images = 0;
  int steps = 0;
  double seconds = 0.0;

  /// Deterministic fields only.
  nlohmann::json metrics_json() const;
  nlohmann::json timing_json() const;
};

struct PhaseReport {
  std::string name;
  std::vector<EpochLog> epochs;
  /// Setup, checkpoint writing and other time outside the epoch loops.
  double overhead_seconds = 0.0;

  double epoch_seconds() const;
  double seconds() const { return epoch_seconds() + overhead_seconds; }
};

struct TrainResult {
  SsadModel model;
  std::vector<PhaseReport> phases;

  double total_seconds() const;
  nlohmann::json timing_summary() const;
};

struct TrainOptions {
  /// When set, metrics.jsonl, timing.jsonl, checkpoint.ssad and detector.ssad
  /// are written here (phase1_ssl/ and phase2_ft/ for ssl_then_ft).
  std::optional<std::filesystem::path> out_dir;
  /// Resume a single-phase run from a checkpoint.
  std::optional<std::filesystem::path> resume_from;
  /// Stop after this many epochs (for tests); 0 runs the full budget.
  int max_epochs = 0;
  std::function<void(const EpochLog&)> on_epoch;
  /// Replaces build_model, e.g. to plug in another detector.
  std::function<SsadModel(const TrainConfig&, int n_categories, int in_channels)> model_factory;
};

/// Runs the configured paradigm. ssl_then_ft trains reconstruction and
/// texture losses for phase1_epochs(), then copies the encoder into a fresh
/// model and trains detection only with new optimizers.
TrainResult train(const ImageDataset& train_set, const TrainConfig& config, const TrainOptions& options = {});

/// Resizes every image (and its boxes) to `image_size`.
ImageDataset resize_dataset(const ImageDataset& data, int image_size, int patch_size);

struct Checkpoint {
  TrainConfig config;
  std::string phase;
  int epoch = 0;
  int n_categories = 0;
  SsadModel model;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Detector-only copy: encoder and heads, no decoder or extractor.
DetectorHandle strip_for_inference(const Checkpoint& checkpoint);
/// Writes the stripped detector archive.
void strip_for_inference(const std::filesystem::path& checkpoint_path, const std::filesystem::path& detector_path);

}  // namespace ssad

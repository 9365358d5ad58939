#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ssad/data.hpp"
#include "ssad/encoder.hpp"

namespace ssad {

struct Detection {
  GroundTruthBox box;  // box.category_id is the predicted category
  double score = 0.0;

  int category_id() const noexcept { return box.category_id; }
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GridGeometry {
  int rows = 0;
  int cols = 0;
  int stride = 0;

  int cells() const { return rows * cols; }
  double center_x(int col) const { return (col + 0.5) * stride; }
  double center_y(int row) const { return (row + 0.5) * stride; }
};

/// Per-cell training targets. Background cells carry label == n_categories.
struct TargetAssignment {
  GridGeometry grid;
  int n_categories = 0;
  std::vector<int> labels;
  /// (left, top, right, bottom) distances from the cell center to the box
  /// edges, in stride units; zero for background cells.
  std::vector<std::array<double, 4>> offsets;
  /// Index into the record's boxes, or -1.
  std::vector<int> box_index;

  int background() const { return n_categories; }
  bool positive(int cell) const { return labels[cell] != n_categories; }
  int positives() const;
};

/// Each box claims the cell containing its center; when two boxes claim the
/// same cell the smaller-area box wins (the earlier box on equal areas).
TargetAssignment assign_targets(const AnnotationRecord& record, const GridGeometry& grid, int n_categories);

/// Raw head outputs: logits (C+1, rows, cols) and edge offsets (4, rows, cols).
struct HeadOutputs {
  Tensor cls_logits;
  Tensor regression;
};

struct DetLoss {
  double cls = 0.0;
  double reg = 0.0;
};

/// cls: mean softmax cross-entropy over all cells; reg: mean L1 over the four
/// offsets of positive cells (0 when there are none).
DetLoss det_loss(const HeadOutputs& outputs, const TargetAssignment& targets);

struct DetLossVars {
  Var cls;
  Var reg;
};
DetLossVars det_loss(Tape& tape, Var cls_logits, Var regression, const TargetAssignment& targets);

/// Greedy per-category suppression; output sorted by descending score.
std::vector<Detection> non_max_suppression(std::vector<Detection> detections, double iou_threshold);

/// Softmax per cell, every foreground class scoring above `score_threshold`
/// becomes a candidate, boxes decoded from the cell center and clipped to the
/// image; invalid boxes are dropped before suppression.
std::vector<Detection> decode_detections(const HeadOutputs& outputs, const GridGeometry& grid, int image_width,
                                         int image_height, double score_threshold, double nms_iou);

inline constexpr double kDefaultScoreThreshold = 0.05;
inline constexpr double kDefaultNmsIou = 0.5;

/// Detector plugged onto a shared encoder. Trainers only talk to this
/// interface.
class DetectorAdapter {
 public:
  virtual ~DetectorAdapter() = default;

  virtual std::string kind() const = 0;
  virtual const EncoderHandle& encoder() const = 0;
  virtual int num_categories() const = 0;
  virtual const ParameterList& head_parameters() const = 0;
  /// Records detection losses for one image given its encoded features.
  virtual DetLossVars loss(Tape& tape, Var features, const AnnotationRecord& record) const = 0;
  virtual std::vector<Detection> detect_features(const FeatureMap& features, int image_width, int image_height,
                                                 double score_threshold, double nms_iou) const = 0;
  /// Structural description used to rebuild the adapter from an archive.
  virtual nlohmann::json describe() const = 0;

  std::vector<Detection> detect(const ImageBuffer& img, double score_threshold = kDefaultScoreThreshold,
                                double nms_iou = kDefaultNmsIou) const;
};

using DetectorHandle = std::shared_ptr<DetectorAdapter>;

struct DetectorConfig {
  int n_categories = 3;
  int hidden = 64;
  std::uint64_t seed = 2;
};

/// Single-scale anchor-free detector: a classification head and a regression
/// head, each a 3x3 conv + ReLU followed by a 1x1 projection.
class CenterCellDetector final : public DetectorAdapter {
 public:
  CenterCellDetector(EncoderHandle encoder, const DetectorConfig& config);

  std::string kind() const override { return "center_cell"; }
  const EncoderHandle& encoder() const override { return encoder_; }
  int num_categories() const override { return n_categories_; }
  const ParameterList& head_parameters() const override { return params_; }
  DetLossVars loss(Tape& tape, Var features, const AnnotationRecord& record) const override;
  std::vector<Detection> detect_features(const FeatureMap& features, int image_width, int image_height,
                                         double score_threshold, double nms_iou) const override;
  nlohmann::json describe() const override;

  HeadOutputs heads(const FeatureMap& features) const;
  std::pair<Var, Var> heads(Tape& tape, Var features) const;

 private:
  EncoderHandle encoder_;
  int n_categories_;
  int hidden_;
  nn::Conv2d cls_hidden_;
  nn::Conv2d cls_out_;
  nn::Conv2d reg_hidden_;
  nn::Conv2d reg_out_;
  ParameterList params_;
};

/// Describes a ConvEncoder so it can be rebuilt from an archive.
nlohmann::json describe_encoder(const Encoder& encoder);
EncoderHandle encoder_from_description(const nlohmann::json& description);
DetectorHandle detector_from_description(const nlohmann::json& description, EncoderHandle encoder);

/// Detector-only archive: encoder and head parameters plus their structure.
void save_detector(const std::filesystem::path& path, const DetectorAdapter& detector,
                   const nlohmann::json& extra_metadata = nlohmann::json::object());
DetectorHandle load_detector(const std::filesystem::path& path);

}  // namespace ssad

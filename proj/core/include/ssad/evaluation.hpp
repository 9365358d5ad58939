#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ssad/data.hpp"
#include "ssad/detection.hpp"

namespace ssad::eval {

double iou(const GroundTruthBox& a, const GroundTruthBox& b);

struct MatchedPrediction {
  Detection detection;
  int matched_gt = -1;  // index into the ground-truth list, or -1 for a false positive
  double iou = 0.0;
  bool true_positive() const noexcept { return matched_gt >= 0; }
};

/// Greedy matching for one image. `predictions` comes back in descending
/// score order (stable for ties).
struct MatchResult {
  std::vector<MatchedPrediction> predictions;
  std::vector<int> gt_matched_by;  // prediction index per ground truth, -1 if missed
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

MatchResult match_detections(std::vector<Detection> predictions, const std::vector<GroundTruthBox>& ground_truths,
                             double iou_threshold);

struct ScoredMatch {
  double score = 0.0;
  bool true_positive = false;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// Precision/recall after each prediction in descending score order.
std::vector<PrPoint> precision_recall_curve(std::vector<ScoredMatch> matches, int n_ground_truth);

/// All-points interpolated AP: area under the monotone precision envelope.
/// Empty when the category has no ground truth.
std::optional<double> average_precision(std::vector<ScoredMatch> matches, int n_ground_truth);

struct CategoryAp {
  int category_id = 0;
  std::string name;
  int n_ground_truth = 0;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap50_95;

  friend bool operator==(const CategoryAp&, const CategoryAp&) = default;
};

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  long total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MetricReport {
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ap50_95 = 0.0;
  std::optional<double> paper_auc;
  std::optional<double> specificity;
  std::vector<CategoryAp> per_category;
  ConfusionCounts counts;
  double confusion_score_threshold = 0.5;
  int n_images = 0;

  nlohmann::json to_json() const;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

/// Mean AP over categories that have ground truth, at one IoU threshold.
/// Per-category APs are written to `per_category` when given.
double mean_average_precision(const std::vector<std::vector<Detection>>& predictions,
                              const std::vector<std::vector<GroundTruthBox>>& ground_truths, int n_categories,
                              double iou_threshold, std::vector<std::optional<double>>* per_category = nullptr);

/// Image-level counts per category: an image is positive for c when it holds a
/// ground-truth box of c, predicted positive when a detection of c scores at
/// least `score_threshold`.
std::vector<ConfusionCounts> image_level_counts(const std::vector<std::vector<Detection>>& predictions,
                                                const std::vector<std::vector<GroundTruthBox>>& ground_truths,
                                                int n_categories, double score_threshold);

struct AucSpecificity {
  std::optional<double> paper_auc;
  std::optional<double> specificity;
};

/// (TP+TN)/(TP+FN+FP+TN) and TN/(TN+FP); absent when a denominator is zero.
AucSpecificity auc_and_specificity(const ConfusionCounts& counts);

/// Full report. Confusion counts are pooled over categories before the ratios.
MetricReport map_suite(const std::vector<std::vector<Detection>>& predictions,
                       const std::vector<std::vector<GroundTruthBox>>& ground_truths,
                       const std::vector<std::string>& category_names, double confusion_score_threshold = 0.5);

/// Precision/recall curve of one category at one IoU threshold.
std::vector<PrPoint> category_pr_curve(const std::vector<std::vector<Detection>>& predictions,
                                       const std::vector<std::vector<GroundTruthBox>>& ground_truths, int category,
                                       double iou_threshold);

/// Runs the detector on every image (evaluation mode).
std::vector<std::vector<Detection>> predict_dataset(const DetectorAdapter& detector,
                                                    const std::vector<ImageBuffer>& images,
                                                    double score_threshold = kDefaultScoreThreshold,
                                                    double nms_iou = kDefaultNmsIou);

/// Ground-truth boxes per image.
std::vector<std::vector<GroundTruthBox>> ground_truth_boxes(const CocoDataset& dataset);

void write_report(const std::filesystem::path& path, const MetricReport& report);

/// COCO results: [{image_id, category_id, bbox: [x, y, w, h], score}].
/// Dense category ids are mapped back through `dataset.source_category_ids`.
void write_coco_results(const std::filesystem::path& path, const CocoDataset& dataset,
                        const std::vector<std::vector<Detection>>& predictions);
std::vector<std::vector<Detection>> read_coco_results(const std::filesystem::path& path, const CocoDataset& dataset);

/// Standalone SVG plot of a precision/recall curve.
void write_pr_curve_svg(const std::filesystem::path& path, const std::vector<PrPoint>& curve, const std::string& title);

/// Rows of a paradigm / ablation comparison.
struct ComparisonRow {
  std::string paradigm;
  std::string method;
  std::string tc_loss;  // "yes", "no" or "-"
  MetricReport report;
  int runs = 1;
};

/// Mean of each metric over runs; optional metrics average over the runs
/// that define them.
MetricReport mean_report(const std::vector<MetricReport>& reports);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_text(const std::vector<ComparisonRow>& rows);

}  // namespace ssad::eval

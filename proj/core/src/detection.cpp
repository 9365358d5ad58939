#include "ssad/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ssad {

int TargetAssignment::positives() const {
  return static_cast<int>(std::count_if(labels.begin(), labels.end(), [&](int l) { return l != n_categories; }));
}

TargetAssignment assign_targets(const AnnotationRecord& record, const GridGeometry& grid, int n_categories) {
  if (grid.rows <= 0 || grid.cols <= 0 || grid.stride <= 0) throw Error("invalid detection grid");
  TargetAssignment t;
  t.grid = grid;
  t.n_categories = n_categories;
  t.labels.assign(grid.cells(), n_categories);
  t.offsets.assign(grid.cells(), {0.0, 0.0, 0.0, 0.0});
  t.box_index.assign(grid.cells(), -1);
  for (std::size_t i = 0; i < record.boxes.size(); ++i) {
    const auto& b = record.boxes[i];
    if (b.category_id < 0 || b.category_id >= n_categories) {
      throw Error("box category " + std::to_string(b.category_id) + " outside [0, " + std::to_string(n_categories) + ")");
    }
    const int col = std::clamp(static_cast<int>(std::floor(b.center_x() / grid.stride)), 0, grid.cols - 1);
    const int row = std::clamp(static_cast<int>(std::floor(b.center_y() / grid.stride)), 0, grid.rows - 1);
    const int cell = row * grid.cols + col;
    if (t.box_index[cell] >= 0 && record.boxes[t.box_index[cell]].area() <= b.area()) continue;
    const double cx = grid.center_x(col), cy = grid.center_y(row), s = grid.stride;
    t.labels[cell] = b.category_id;
    t.box_index[cell] = static_cast<int>(i);
    t.offsets[cell] = {(cx - b.x_min) / s, (cy - b.y_min) / s, (b.x_max - cx) / s, (b.y_max - cy) / s};
  }
  return t;
}

DetLossVars det_loss(Tape& tape, Var cls_logits, Var regression, const TargetAssignment& targets) {
  const Tensor& logits = tape.value(cls_logits);
  const Tensor& reg = tape.value(regression);
  const int k = targets.n_categories + 1, rows = targets.grid.rows, cols = targets.grid.cols;
  if (logits.rank() != 3 || logits.dim(0) != k || logits.dim(1) != rows || logits.dim(2) != cols) {
    throw Error("classification logits " + shape_string(logits.shape()) + " do not match the target grid");
  }
  if (reg.rank() != 3 || reg.dim(0) != 4 || reg.dim(1) != rows || reg.dim(2) != cols) {
    throw Error("regression output " + shape_string(reg.shape()) + " does not match the target grid");
  }
  const int cells = rows * cols;
  const std::size_t plane = static_cast<std::size_t>(cells);

  // Softmax probabilities are kept for the backward pass.
  std::vector<double> probs(static_cast<std::size_t>(k) * cells);
  double ce = 0.0;
  for (int cell = 0; cell < cells; ++cell) {
    double mx = logits[cell];
    for (int c = 1; c < k; ++c) mx = std::max(mx, logits[c * plane + cell]);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(logits[c * plane + cell] - mx);
    const double log_z = mx + std::log(z);
    ce += log_z - logits[targets.labels[cell] * plane + cell];
    for (int c = 0; c < k; ++c) probs[c * plane + cell] = std::exp(logits[c * plane + cell] - log_z);
  }
  const double inv_cells = 1.0 / cells;
  Var cls = tape.record(Tensor::scalar(ce * inv_cells), {cls_logits}, [=, labels = targets.labels](Tape& t, Var out) {
    const double g = t.grad(out)[0] * inv_cells;
    Tensor& gl = t.grad_buffer(cls_logits);
    for (int cell = 0; cell < cells; ++cell)
      for (int c = 0; c < k; ++c) gl[c * plane + cell] += g * (probs[c * plane + cell] - (labels[cell] == c ? 1.0 : 0.0));
  });

  const int positives = targets.positives();
  if (positives == 0) return {cls, tape.constant(Tensor::scalar(0.0))};
  double l1 = 0.0;
  for (int cell = 0; cell < cells; ++cell) {
    if (!targets.positive(cell)) continue;
    for (int e = 0; e < 4; ++e) l1 += std::abs(reg[e * plane + cell] - targets.offsets[cell][e]);
  }
  const double inv_terms = 1.0 / (4.0 * positives);
  Var reg_loss = tape.record(Tensor::scalar(l1 * inv_terms), {regression}, [=, tg = targets](Tape& t, Var out) {
    const double g = t.grad(out)[0] * inv_terms;
    const Tensor& r = t.value(regression);
    Tensor& gr = t.grad_buffer(regression);
    for (int cell = 0; cell < cells; ++cell) {
      if (!tg.positive(cell)) continue;
      for (int e = 0; e < 4; ++e) {
        const double d = r[e * plane + cell] - tg.offsets[cell][e];
        gr[e * plane + cell] += g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
      }
    }
  });
  return {cls, reg_loss};
}

DetLoss det_loss(const HeadOutputs& outputs, const TargetAssignment& targets) {
  Tape tape(false);
  auto v = det_loss(tape, tape.constant(outputs.cls_logits), tape.constant(outputs.regression), targets);
  return {tape.value(v.cls).item(), tape.value(v.reg).item()};
}

std::vector<Detection> non_max_suppression(std::vector<Detection> detections, double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (const auto& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.category_id() == d.category_id() && box_iou(k.box, d.box) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> decode_detections(const HeadOutputs& outputs, const GridGeometry& grid, int image_width,
                                         int image_height, double score_threshold, double nms_iou) {
  const Tensor& logits = outputs.cls_logits;
  const Tensor& reg = outputs.regression;
  const int k = logits.dim(0), cells = grid.cells();
  const std::size_t plane = static_cast<std::size_t>(cells);
  std::vector<Detection> candidates;
  for (int cell = 0; cell < cells; ++cell) {
    double mx = logits[cell];
    for (int c = 1; c < k; ++c) mx = std::max(mx, logits[c * plane + cell]);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(logits[c * plane + cell] - mx);
    const int row = cell / grid.cols, col = cell % grid.cols;
    const double cx = grid.center_x(col), cy = grid.center_y(row), s = grid.stride;
    GroundTruthBox box{std::clamp(cx - reg[0 * plane + cell] * s, 0.0, static_cast<double>(image_width)),
                       std::clamp(cy - reg[1 * plane + cell] * s, 0.0, static_cast<double>(image_height)),
                       std::clamp(cx + reg[2 * plane + cell] * s, 0.0, static_cast<double>(image_width)),
                       std::clamp(cy + reg[3 * plane + cell] * s, 0.0, static_cast<double>(image_height)), 0};
    if (!box.valid()) continue;
    for (int c = 0; c + 1 < k; ++c) {
      const double p = std::exp(logits[c * plane + cell] - mx) / z;
      if (p > score_threshold) {
        box.category_id = c;
        candidates.push_back(Detection{box, std::clamp(p, 0.0, 1.0)});
      }
    }
  }
  return non_max_suppression(std::move(candidates), nms_iou);
}

std::vector<Detection> DetectorAdapter::detect(const ImageBuffer& img, double score_threshold, double nms_iou) const {
  return detect_features(encoder()->encode(img), img.width(), img.height(), score_threshold, nms_iou);
}

CenterCellDetector::CenterCellDetector(EncoderHandle encoder, const DetectorConfig& config)
    : encoder_(std::move(encoder)),
      n_categories_(config.n_categories),
      hidden_(config.hidden),
      cls_hidden_([&] {
        if (!encoder_) throw Error("detector needs an encoder");
        if (config.n_categories < 1 || config.hidden < 1) throw Error("invalid detector config");
        std::mt19937_64 rng(config.seed);
        return nn::Conv2d("detector.cls_head.hidden", encoder_->out_channels(), config.hidden, {3, 1, 1}, rng);
      }()),
      cls_out_([&] {
        std::mt19937_64 rng(config.seed + 1);
        return nn::Conv2d("detector.cls_head.out", config.hidden, config.n_categories + 1, {1, 1, 0}, rng);
      }()),
      reg_hidden_([&] {
        std::mt19937_64 rng(config.seed + 2);
        return nn::Conv2d("detector.reg_head.hidden", encoder_->out_channels(), config.hidden, {3, 1, 1}, rng);
      }()),
      reg_out_([&] {
        std::mt19937_64 rng(config.seed + 3);
        return nn::Conv2d("detector.reg_head.out", config.hidden, 4, {1, 1, 0}, rng);
      }()) {
  for (double& w : cls_out_.weight->value.values()) w *= 0.1;
  for (double& w : reg_out_.weight->value.values()) w *= 0.1;
  params_ = merge_parameters(
      {cls_hidden_.parameters(), cls_out_.parameters(), reg_hidden_.parameters(), reg_out_.parameters()});
}

std::pair<Var, Var> CenterCellDetector::heads(Tape& tape, Var features) const {
  Var logits = cls_out_(tape, ops::relu(tape, cls_hidden_(tape, features)));
  Var reg = reg_out_(tape, ops::relu(tape, reg_hidden_(tape, features)));
  return {logits, reg};
}

HeadOutputs CenterCellDetector::heads(const FeatureMap& features) const {
  Tape tape(false);
  auto [logits, reg] = heads(tape, tape.constant(features.values));
  return {tape.value(logits), tape.value(reg)};
}

DetLossVars CenterCellDetector::loss(Tape& tape, Var features, const AnnotationRecord& record) const {
  const Tensor& f = tape.value(features);
  const GridGeometry grid{f.dim(1), f.dim(2), encoder_->stride()};
  auto [logits, reg] = heads(tape, features);
  return det_loss(tape, logits, reg, assign_targets(record, grid, n_categories_));
}

std::vector<Detection> CenterCellDetector::detect_features(const FeatureMap& features, int image_width,
                                                           int image_height, double score_threshold,
                                                           double nms_iou) const {
  const GridGeometry grid{features.rows(), features.cols(), encoder_->stride()};
  return decode_detections(heads(features), grid, image_width, image_height, score_threshold, nms_iou);
}

nlohmann::json CenterCellDetector::describe() const {
  return {{"kind", kind()}, {"n_categories", n_categories_}, {"hidden", hidden_}};
}

nlohmann::json describe_encoder(const Encoder& encoder) {
  const auto* conv = dynamic_cast<const ConvEncoder*>(&encoder);
  if (conv == nullptr) throw Error("only the reference encoder can be described for archiving");
  const auto& c = conv->config();
  return {{"kind", "conv"}, {"in_channels", c.in_channels}, {"out_channels", c.out_channels}, {"widths", c.widths}};
}

EncoderHandle encoder_from_description(const nlohmann::json& description) {
  if (description.value("kind", "") != "conv") throw Error("unknown encoder kind in archive");
  EncoderConfig c;
  c.in_channels = description.at("in_channels").get<int>();
  c.out_channels = description.at("out_channels").get<int>();
  c.widths = description.at("widths").get<std::vector<int>>();
  return reference_encoder(c);
}

DetectorHandle detector_from_description(const nlohmann::json& description, EncoderHandle encoder) {
  if (description.value("kind", "") != "center_cell") throw Error("unknown detector kind in archive");
  DetectorConfig c;
  c.n_categories = description.at("n_categories").get<int>();
  c.hidden = description.at("hidden").get<int>();
  return std::make_shared<CenterCellDetector>(std::move(encoder), c);
}

void save_detector(const std::filesystem::path& path, const DetectorAdapter& detector,
                   const nlohmann::json& extra_metadata) {
  nn::Archive a;
  a.metadata = extra_metadata;
  a.metadata["archive"] = "detector";
  a.metadata["encoder"] = describe_encoder(*detector.encoder());
  a.metadata["detector"] = detector.describe();
  a.put(detector.encoder()->parameters());
  a.put(detector.head_parameters());
  a.save(path);
}

DetectorHandle load_detector(const std::filesystem::path& path) {
  const auto a = nn::Archive::load(path);
  if (!a.metadata.contains("encoder") || !a.metadata.contains("detector")) {
    throw Error("archive " + path.string() + " does not describe a detector");
  }
  auto encoder = encoder_from_description(a.metadata.at("encoder"));
  auto detector = detector_from_description(a.metadata.at("detector"), encoder);
  a.restore(encoder->parameters());
  a.restore(detector->head_parameters());
  return detector;
}

}  // namespace ssad

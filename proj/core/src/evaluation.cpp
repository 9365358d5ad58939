#include "ssad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace ssad::eval {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string percent(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << *v * 100.0;
  return os.str();
}

}  // namespace

double iou(const GroundTruthBox& a, const GroundTruthBox& b) { return box_iou(a, b); }

MatchResult match_detections(std::vector<Detection> predictions, const std::vector<GroundTruthBox>& ground_truths,
                             double iou_threshold) {
  std::stable_sort(predictions.begin(), predictions.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  MatchResult r;
  r.gt_matched_by.assign(ground_truths.size(), -1);
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    MatchedPrediction m{predictions[p], -1, 0.0};
    double best = -1.0;
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      if (r.gt_matched_by[g] >= 0 || ground_truths[g].category_id != predictions[p].category_id()) continue;
      const double v = box_iou(predictions[p].box, ground_truths[g]);
      if (v >= iou_threshold && v > best) {
        best = v;
        m.matched_gt = static_cast<int>(g);
        m.iou = v;
      }
    }
    if (m.true_positive()) {
      r.gt_matched_by[m.matched_gt] = static_cast<int>(p);
      ++r.tp;
    } else {
      ++r.fp;
    }
    r.predictions.push_back(m);
  }
  r.fn = static_cast<int>(ground_truths.size()) - r.tp;
  return r;
}

std::vector<PrPoint> precision_recall_curve(std::vector<ScoredMatch> matches, int n_ground_truth) {
  std::stable_sort(matches.begin(), matches.end(),
                   [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
  std::vector<PrPoint> curve;
  curve.reserve(matches.size());
  long tp = 0, fp = 0;
  for (const auto& m : matches) {
    (m.true_positive ? tp : fp) += 1;
    curve.push_back({n_ground_truth > 0 ? static_cast<double>(tp) / n_ground_truth : 0.0,
                     static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

std::optional<double> average_precision(std::vector<ScoredMatch> matches, int n_ground_truth) {
  if (n_ground_truth <= 0) return std::nullopt;
  auto curve = precision_recall_curve(std::move(matches), n_ground_truth);
  for (std::size_t i = curve.size(); i-- > 1;) {
    curve[i - 1].precision = std::max(curve[i - 1].precision, curve[i].precision);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (const auto& pt : curve) {
    ap += (pt.recall - prev_recall) * pt.precision;
    prev_recall = pt.recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

double mean_average_precision(const std::vector<std::vector<Detection>>& predictions,
                              const std::vector<std::vector<GroundTruthBox>>& ground_truths, int n_categories,
                              double iou_threshold, std::vector<std::optional<double>>* per_category) {
  if (predictions.size() != ground_truths.size()) throw Error("prediction and ground-truth image counts differ");
  std::vector<std::vector<ScoredMatch>> matches(n_categories);
  std::vector<int> n_gt(n_categories, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (const auto& g : ground_truths[i]) {
      if (g.category_id < 0 || g.category_id >= n_categories) throw Error("ground-truth category out of range");
      ++n_gt[g.category_id];
    }
    const auto r = match_detections(predictions[i], ground_truths[i], iou_threshold);
    for (const auto& m : r.predictions) {
      const int c = m.detection.category_id();
      if (c < 0 || c >= n_categories) throw Error("predicted category out of range");
      matches[c].push_back({m.detection.score, m.true_positive()});
    }
  }
  double sum = 0.0;
  int counted = 0;
  if (per_category) per_category->assign(n_categories, std::nullopt);
  for (int c = 0; c < n_categories; ++c) {
    const auto ap = average_precision(std::move(matches[c]), n_gt[c]);
    if (per_category) (*per_category)[c] = ap;
    if (ap) {
      sum += *ap;
      ++counted;
    }
  }
  return counted ? sum / counted : 0.0;
}

std::vector<ConfusionCounts> image_level_counts(const std::vector<std::vector<Detection>>& predictions,
                                                const std::vector<std::vector<GroundTruthBox>>& ground_truths,
                                                int n_categories, double score_threshold) {
  if (predictions.size() != ground_truths.size()) throw Error("prediction and ground-truth image counts differ");
  std::vector<ConfusionCounts> counts(n_categories);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (int c = 0; c < n_categories; ++c) {
      const bool actual = std::any_of(ground_truths[i].begin(), ground_truths[i].end(),
                                      [c](const GroundTruthBox& g) { return g.category_id == c; });
      const bool predicted = std::any_of(predictions[i].begin(), predictions[i].end(), [&](const Detection& d) {
        return d.category_id() == c && d.score >= score_threshold;
      });
      auto& k = counts[c];
      if (actual && predicted) ++k.tp;
      else if (!actual && predicted) ++k.fp;
      else if (actual && !predicted) ++k.fn;
      else ++k.tn;
    }
  }
  return counts;
}

AucSpecificity auc_and_specificity(const ConfusionCounts& k) {
  if (k.tp < 0 || k.fp < 0 || k.fn < 0 || k.tn < 0) throw Error("confusion counts must be non-negative");
  AucSpecificity out;
  if (k.total() > 0) out.paper_auc = static_cast<double>(k.tp + k.tn) / static_cast<double>(k.total());
  if (k.tn + k.fp > 0) out.specificity = static_cast<double>(k.tn) / static_cast<double>(k.tn + k.fp);
  return out;
}

MetricReport map_suite(const std::vector<std::vector<Detection>>& predictions,
                       const std::vector<std::vector<GroundTruthBox>>& ground_truths,
                       const std::vector<std::string>& category_names, double confusion_score_threshold) {
  const int n = static_cast<int>(category_names.size());
  MetricReport report;
  report.n_images = static_cast<int>(predictions.size());
  report.confusion_score_threshold = confusion_score_threshold;
  report.per_category.resize(n);
  for (int c = 0; c < n; ++c) {
    report.per_category[c].category_id = c;
    report.per_category[c].name = category_names[c];
  }
  for (const auto& gts : ground_truths)
    for (const auto& g : gts)
      if (g.category_id >= 0 && g.category_id < n) ++report.per_category[g.category_id].n_ground_truth;

  const auto thresholds = coco_iou_thresholds();
  std::vector<double> cat_sum(n, 0.0);
  double sum = 0.0;
  for (double t : thresholds) {
    std::vector<std::optional<double>> per;
    const double m = mean_average_precision(predictions, ground_truths, n, t, &per);
    sum += m;
    for (int c = 0; c < n; ++c) {
      if (per[c]) cat_sum[c] += *per[c];
    }
    if (t == 0.5) {
      report.ap50 = m;
      for (int c = 0; c < n; ++c) report.per_category[c].ap50 = per[c];
    }
    if (t == 0.75) {
      report.ap75 = m;
      for (int c = 0; c < n; ++c) report.per_category[c].ap75 = per[c];
    }
  }
  report.ap50_95 = sum / static_cast<double>(thresholds.size());
  for (int c = 0; c < n; ++c) {
    if (report.per_category[c].n_ground_truth > 0) {
      report.per_category[c].ap50_95 = cat_sum[c] / static_cast<double>(thresholds.size());
    }
  }

  for (const auto& k : image_level_counts(predictions, ground_truths, n, confusion_score_threshold)) report.counts += k;
  const auto as = auc_and_specificity(report.counts);
  report.paper_auc = as.paper_auc;
  report.specificity = as.specificity;
  return report;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["AP50"] = ap50;
  j["AP75"] = ap75;
  j["AP50_95"] = ap50_95;
  j["paper_auc"] = optional_json(paper_auc);
  j["specificity"] = optional_json(specificity);
  j["confusion"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn},
                    {"score_threshold", confusion_score_threshold}};
  j["n_images"] = n_images;
  j["per_category"] = nlohmann::json::array();
  for (const auto& c : per_category) {
    j["per_category"].push_back({{"category_id", c.category_id},
                                 {"name", c.name},
                                 {"n_ground_truth", c.n_ground_truth},
                                 {"AP50", optional_json(c.ap50)},
                                 {"AP75", optional_json(c.ap75)},
                                 {"AP50_95", optional_json(c.ap50_95)}});
  }
  return j;
}

std::vector<PrPoint> category_pr_curve(const std::vector<std::vector<Detection>>& predictions,
                                       const std::vector<std::vector<GroundTruthBox>>& ground_truths, int category,
                                       double iou_threshold) {
  if (predictions.size() != ground_truths.size()) throw Error("prediction and ground-truth image counts differ");
  std::vector<ScoredMatch> matches;
  int n_gt = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (const auto& g : ground_truths[i]) n_gt += g.category_id == category ? 1 : 0;
    for (const auto& m : match_detections(predictions[i], ground_truths[i], iou_threshold).predictions) {
      if (m.detection.category_id() == category) matches.push_back({m.detection.score, m.true_positive()});
    }
  }
  return precision_recall_curve(std::move(matches), n_gt);
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw Error("mean_report needs at least one report");
  MetricReport out = reports.front();
  const double n = static_cast<double>(reports.size());
  auto mean_opt = [&](auto get) -> std::optional<double> {
    double s = 0.0;
    int k = 0;
    for (const auto& r : reports) {
      if (const auto v = get(r)) {
        s += *v;
        ++k;
      }
    }
    return k ? std::optional<double>(s / k) : std::nullopt;
  };
  out.ap50 = out.ap75 = out.ap50_95 = 0.0;
  out.counts = {};
  for (const auto& r : reports) {
    out.ap50 += r.ap50 / n;
    out.ap75 += r.ap75 / n;
    out.ap50_95 += r.ap50_95 / n;
    out.counts += r.counts;
  }
  out.paper_auc = mean_opt([](const MetricReport& r) { return r.paper_auc; });
  out.specificity = mean_opt([](const MetricReport& r) { return r.specificity; });
  for (std::size_t c = 0; c < out.per_category.size(); ++c) {
    auto& pc = out.per_category[c];
    pc.ap50 = mean_opt([c](const MetricReport& r) { return r.per_category.at(c).ap50; });
    pc.ap75 = mean_opt([c](const MetricReport& r) { return r.per_category.at(c).ap75; });
    pc.ap50_95 = mean_opt([c](const MetricReport& r) { return r.per_category.at(c).ap50_95; });
  }
  return out;
}

std::vector<std::vector<Detection>> predict_dataset(const DetectorAdapter& detector,
                                                    const std::vector<ImageBuffer>& images, double score_threshold,
                                                    double nms_iou) {
  std::vector<std::vector<Detection>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(detector.detect(img, score_threshold, nms_iou));
  return out;
}

std::vector<std::vector<GroundTruthBox>> ground_truth_boxes(const CocoDataset& dataset) {
  std::vector<std::vector<GroundTruthBox>> out;
  out.reserve(dataset.records.size());
  for (const auto& r : dataset.records) out.push_back(r.boxes);
  return out;
}

void write_report(const std::filesystem::path& path, const MetricReport& report) {
  write_text(path, report.to_json().dump(2) + "\n");
}

void write_coco_results(const std::filesystem::path& path, const CocoDataset& dataset,
                        const std::vector<std::vector<Detection>>& predictions) {
  if (predictions.size() != dataset.records.size()) throw Error("prediction count does not match dataset");
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (const auto& d : predictions[i]) {
      const int c = d.category_id();
      const auto source = c < static_cast<int>(dataset.source_category_ids.size()) ? dataset.source_category_ids[c] : c;
      out.push_back({{"image_id", dataset.records[i].image_id},
                     {"category_id", source},
                     {"bbox", {d.box.x_min, d.box.y_min, d.box.width(), d.box.height()}},
                     {"score", d.score}});
    }
  }
  write_text(path, out.dump(2) + "\n");
}

std::vector<std::vector<Detection>> read_coco_results(const std::filesystem::path& path, const CocoDataset& dataset) {
  std::ifstream in(path);
  if (!in) throw Error("results file not found: " + path.string());
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed results JSON in " + path.string() + ": " + e.what());
  }
  if (!root.is_array()) throw Error("COCO results must be a JSON array");
  std::map<std::int64_t, std::size_t> by_image;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) by_image[dataset.records[i].image_id] = i;
  std::map<std::int64_t, int> dense;
  for (std::size_t c = 0; c < dataset.source_category_ids.size(); ++c) dense[dataset.source_category_ids[c]] = static_cast<int>(c);

  std::vector<std::vector<Detection>> out(dataset.records.size());
  for (const auto& r : root) {
    const auto image_id = r.at("image_id").get<std::int64_t>();
    auto it = by_image.find(image_id);
    if (it == by_image.end()) throw Error("result references unknown image id " + std::to_string(image_id));
    auto cit = dense.find(r.at("category_id").get<std::int64_t>());
    if (cit == dense.end()) throw Error("result references unknown category id");
    const auto& b = r.at("bbox");
    const double x = b.at(0).get<double>(), y = b.at(1).get<double>();
    Detection d{{x, y, x + b.at(2).get<double>(), y + b.at(3).get<double>(), cit->second}, r.at("score").get<double>()};
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw Error("result score outside [0, 1]");
    out[it->second].push_back(d);
  }
  return out;
}

void write_pr_curve_svg(const std::filesystem::path& path, const std::vector<PrPoint>& curve, const std::string& title) {
  constexpr double size = 320.0, margin = 40.0;
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin << "\" height=\"" << size + 2 * margin
     << "\">\n";
  os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
     << "\" fill=\"white\" stroke=\"black\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"" << margin - 12 << "\" font-family=\"sans-serif\" font-size=\"14\">" << title
     << "</text>\n";
  os << "<text x=\"" << margin + size / 2 - 20 << "\" y=\"" << margin + size + 28
     << "\" font-family=\"sans-serif\" font-size=\"12\">recall</text>\n";
  os << "<text x=\"4\" y=\"" << margin + size / 2 << "\" font-family=\"sans-serif\" font-size=\"12\">precision</text>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  double prev_recall = 0.0;
  for (const auto& p : curve) {
    // Step plot: horizontal to the new recall, then vertical to the new precision.
    os << margin + prev_recall * size << ',' << margin + (1.0 - p.precision) * size << ' ';
    os << margin + p.recall * size << ',' << margin + (1.0 - p.precision) * size << ' ';
    prev_recall = p.recall;
  }
  os << "\"/>\n</svg>\n";
  write_text(path, os.str());
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "paradigm,method,tc_loss,runs,AP50_95,AP50,AP75,paper_auc,specificity\n";
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s << std::setprecision(17);
    if (v) s << *v;
    return s.str();
  };
  for (const auto& r : rows) {
    os << r.paradigm << ',' << r.method << ',' << r.tc_loss << ',' << r.runs << ',' << r.report.ap50_95 << ','
       << r.report.ap50 << ',' << r.report.ap75 << ',' << opt(r.report.paper_auc) << ',' << opt(r.report.specificity)
       << '\n';
  }
  return os.str();
}

std::string comparison_text(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "Paradigm" << std::setw(16) << "Method" << std::setw(8) << "L_TC" << std::right
     << std::setw(10) << "AP50:95" << std::setw(10) << "AP50" << std::setw(10) << "AP75" << std::setw(10) << "AUC"
     << std::setw(10) << "Spec" << std::setw(6) << "runs" << '\n';
  os << std::string(96, '-') << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(16) << r.paradigm << std::setw(16) << r.method << std::setw(8) << r.tc_loss
       << std::right << std::setw(10) << percent(r.report.ap50_95) << std::setw(10) << percent(r.report.ap50)
       << std::setw(10) << percent(r.report.ap75) << std::setw(10) << percent(r.report.paper_auc) << std::setw(10)
       << percent(r.report.specificity) << std::setw(6) << r.runs << '\n';
  }
  return os.str();
}

}  // namespace ssad::eval

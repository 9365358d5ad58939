#include "render.hpp"

#include <cmath>
#include <cstdio>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ssad::tools {
namespace {

cv::Mat to_bgr(const ImageBuffer& img, int scale) {
  cv::Mat out(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const int src = img.channels() == 1 ? 0 : c;
        row[x][2 - c] = static_cast<unsigned char>(std::lround(img.at(src, y, x) * 255.0));
      }
    }
  }
  if (scale > 1) cv::resize(out, out, {}, scale, scale, cv::INTER_NEAREST);
  return out;
}

cv::Rect scaled(const GroundTruthBox& b, int scale) {
  const int x0 = static_cast<int>(std::lround(b.x_min * scale)), y0 = static_cast<int>(std::lround(b.y_min * scale));
  const int x1 = static_cast<int>(std::lround(b.x_max * scale)), y1 = static_cast<int>(std::lround(b.y_max * scale));
  return {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
}

void save(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw Error("cannot write image: " + path.string());
}

std::string category_label(int id, const std::vector<std::string>& names) {
  return id >= 0 && id < static_cast<int>(names.size()) ? names[id] : std::to_string(id);
}

}  // namespace

OverlayResult write_overlay(const std::filesystem::path& path, const ImageBuffer& img,
                            const std::vector<Detection>& detections, const std::vector<std::string>& category_names,
                            const std::vector<GroundTruthBox>* ground_truth, const OverlayStyle& style) {
  const int s = std::max(1, style.scale);
  cv::Mat canvas = to_bgr(img, s);
  OverlayResult r;
  const cv::Scalar gt_color(80, 200, 80), det_color(40, 40, 230);
  if (ground_truth && style.draw_ground_truth) {
    for (const auto& g : *ground_truth) {
      cv::rectangle(canvas, scaled(g, s), gt_color, 1, cv::LINE_8);
      ++r.ground_truth_boxes;
    }
  }
  for (const auto& d : detections) {
    const auto rect = scaled(d.box, s);
    cv::rectangle(canvas, rect, det_color, 2, cv::LINE_8);
    char score[16];
    std::snprintf(score, sizeof score, "%.2f", d.score);
    const std::string label = category_label(d.category_id(), category_names) + " " + score;
    int baseline = 0;
    const auto size = cv::getTextSize(label, cv::FONT_HERSHEY_SIMPLEX, 0.4, 1, &baseline);
    const cv::Point origin(rect.x, std::max(size.height + 2, rect.y - 2));
    cv::rectangle(canvas, {origin.x, origin.y - size.height - 2, size.width + 2, size.height + baseline + 2}, det_color,
                  cv::FILLED);
    cv::putText(canvas, label, {origin.x + 1, origin.y}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {255, 255, 255}, 1,
                cv::LINE_8);
    ++r.detection_boxes;
  }
  save(path, canvas);
  return r;
}

void write_triptych(const std::filesystem::path& path, const ImageBuffer& input, const ImageBuffer& masked,
                    const ImageBuffer& reconstruction, int scale) {
  const int s = std::max(1, scale);
  std::vector<cv::Mat> panels{to_bgr(input, s), to_bgr(masked, s), to_bgr(reconstruction, s)};
  cv::Mat gap(panels[0].rows, 4 * s, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::Mat out;
  cv::hconcat(std::vector<cv::Mat>{panels[0], gap, panels[1], gap, panels[2]}, out);
  save(path, out);
}

}  // namespace ssad::tools

#include <algorithm>
#include <cmath>

#include "ssad/data.hpp"

namespace ssad {

double box_iou(const GroundTruthBox& a, const GroundTruthBox& b) {
  if (!a.valid() || !b.valid()) return 0.0;
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) throw Error("resize target must be positive");
  const int c = img.channels(), h = img.height(), w = img.width();
  const double sy = static_cast<double>(h) / out_height;
  const double sx = static_cast<double>(w) / out_width;
  Tensor out({c, out_height, out_width});
  for (int y = 0; y < out_height; ++y) {
    const double fy_src = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy_src);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = fy_src - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx_src = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx_src);
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = fx_src - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = (1.0 - fx) * img.at(ch, y0, x0) + fx * img.at(ch, y0, x1);
        const double bottom = (1.0 - fx) * img.at(ch, y1, x0) + fx * img.at(ch, y1, x1);
        out.at(ch, y, x) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return image_from_tensor_clamped(std::move(out));
}

std::pair<ImageBuffer, AnnotationRecord> resize_with_boxes(const ImageBuffer& img, const AnnotationRecord& record,
                                                           int target, int patch_size) {
  if (patch_size <= 0 || target <= 0 || target % patch_size != 0) {
    throw Error("resize target " + std::to_string(target) + " is not divisible by patch size " +
                std::to_string(patch_size));
  }
  const double kx = static_cast<double>(target) / img.width();
  const double ky = static_cast<double>(target) / img.height();
  AnnotationRecord out = record;
  out.width = target;
  out.height = target;
  for (auto& b : out.boxes) {
    b.x_min = std::clamp(b.x_min * kx, 0.0, static_cast<double>(target));
    b.x_max = std::clamp(b.x_max * kx, 0.0, static_cast<double>(target));
    b.y_min = std::clamp(b.y_min * ky, 0.0, static_cast<double>(target));
    b.y_max = std::clamp(b.y_max * ky, 0.0, static_cast<double>(target));
  }
  if (img.height() == target && img.width() == target) return {img, std::move(out)};
  return {resize_bilinear(img, target, target), std::move(out)};
}

std::pair<ImageBuffer, AnnotationRecord> horizontal_flip(const ImageBuffer& img, const AnnotationRecord& record) {
  Tensor t = img.tensor();
  const int c = img.channels(), h = img.height(), w = img.width();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t.at(ch, y, x) = img.at(ch, y, w - 1 - x);
  AnnotationRecord out = record;
  const double width = static_cast<double>(w);
  for (auto& b : out.boxes) {
    const double x_min = width - b.x_max;
    b.x_max = width - b.x_min;
    b.x_min = x_min;
  }
  return {ImageBuffer(std::move(t)), std::move(out)};
}

}  // namespace ssad

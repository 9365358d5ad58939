#include "ssad/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ssad {

ImageBuffer::ImageBuffer(int channels, int height, int width, double fill)
    : ImageBuffer(Tensor({channels, height, width}, fill)) {}

ImageBuffer::ImageBuffer(Tensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rank() != 3) throw Error("image must be (C, H, W), got " + shape_string(pixels_.shape()));
  if (pixels_.dim(0) != 1 && pixels_.dim(0) != 3) {
    throw Error("image must have 1 or 3 channels, got " + std::to_string(pixels_.dim(0)));
  }
  if (pixels_.dim(1) <= 0 || pixels_.dim(2) <= 0) throw Error("image dimensions must be positive");
  for (double v : pixels_.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("image value outside [0, 1]: " + std::to_string(v));
  }
}

ImageBuffer image_from_tensor_clamped(Tensor pixels) {
  for (double& v : pixels.values()) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return ImageBuffer(std::move(pixels));
}

ImageBuffer read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("image not found: " + path.string());
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
  if (raw.empty()) throw Error("cannot decode image: " + path.string());
  double max_value = 255.0;
  if (raw.depth() == CV_16U) {
    max_value = 65535.0;
  } else if (raw.depth() != CV_8U) {
    throw Error("unsupported image depth in " + path.string());
  }
  if (raw.channels() == 4) cv::cvtColor(raw, raw, cv::COLOR_BGRA2BGR);
  if (raw.channels() == 3) cv::cvtColor(raw, raw, cv::COLOR_BGR2RGB);
  cv::Mat f;
  raw.convertTo(f, CV_64F, 1.0 / max_value);

  const int c = f.channels(), h = f.rows, w = f.cols;
  ImageBuffer img(c, h, w);
  for (int y = 0; y < h; ++y) {
    const double* row = f.ptr<double>(y);
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) img.at(ch, y, x) = row[x * c + ch];
  }
  return img;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
  const int c = img.channels(), h = img.height(), w = img.width();
  cv::Mat out(h, w, c == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* row = out.ptr<unsigned char>(y);
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        // RGB in memory, BGR on disk.
        const int dst = c == 3 ? 2 - ch : ch;
        row[x * c + dst] = static_cast<unsigned char>(std::lround(img.at(ch, y, x) * 255.0));
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) throw Error("cannot write image: " + path.string());
}

}  // namespace ssad

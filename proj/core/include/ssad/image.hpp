#pragma once

#include <filesystem>

#include "ssad/tensor.hpp"

namespace ssad {

/// A (channels, height, width) image with values normalized to [0, 1].
/// Channel count is 1 (radiograph) or 3 (RGB).
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int channels, int height, int width, double fill = 0.0);
  /// Validates shape and value range.
  explicit ImageBuffer(Tensor pixels);

  int channels() const { return pixels_.dim(0); }
  int height() const { return pixels_.dim(1); }
  int width() const { return pixels_.dim(2); }
  bool empty() const { return pixels_.empty(); }

  double& at(int c, int y, int x) { return pixels_.at(c, y, x); }
  double at(int c, int y, int x) const { return pixels_.at(c, y, x); }

  const Tensor& tensor() const noexcept { return pixels_; }
  /// Mutable access; callers must keep values in [0, 1].
  Tensor& mutable_tensor() noexcept { return pixels_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  Tensor pixels_;
};

/// Clamps every value into [0, 1] and wraps the result.
ImageBuffer image_from_tensor_clamped(Tensor pixels);

/// Reads PNG or JPEG (8/16-bit, gray or color). Color images are returned as RGB.
ImageBuffer read_image(const std::filesystem::path& path);
/// Writes an 8-bit PNG.
void write_png(const std::filesystem::path& path, const ImageBuffer& img);

}  // namespace ssad

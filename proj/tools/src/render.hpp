#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssad/data.hpp"
#include "ssad/detection.hpp"

namespace ssad::tools {

struct OverlayStyle {
  /// Nearest-neighbour upscale so labels stay readable on small images.
  int scale = 1;
  bool draw_ground_truth = true;
};

struct OverlayResult {
  int detection_boxes = 0;
  int ground_truth_boxes = 0;
};

/// Draws detections (label + score) and, optionally, ground truth in a second
/// color. No detections yields a plain copy of the image.
OverlayResult write_overlay(const std::filesystem::path& path, const ImageBuffer& img,
                            const std::vector<Detection>& detections, const std::vector<std::string>& category_names,
                            const std::vector<GroundTruthBox>* ground_truth, const OverlayStyle& style = {});

/// Side-by-side input | masked | reconstruction.
void write_triptych(const std::filesystem::path& path, const ImageBuffer& input, const ImageBuffer& masked,
                    const ImageBuffer& reconstruction, int scale = 1);

}  // namespace ssad::tools

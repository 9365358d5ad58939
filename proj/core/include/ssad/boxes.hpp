#pragma once

namespace ssad {

/// Axis-aligned box in pixel corner form with a dense category index.
struct GroundTruthBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  int category_id = 0;

  bool valid() const noexcept { return x_max > x_min && y_max > y_min; }
  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return valid() ? width() * height() : 0.0; }
  double center_x() const noexcept { return 0.5 * (x_min + x_max); }
  double center_y() const noexcept { return 0.5 * (y_min + y_max); }

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

/// Intersection over union; 0 when either box is degenerate.
double box_iou(const GroundTruthBox& a, const GroundTruthBox& b);

}  // namespace ssad

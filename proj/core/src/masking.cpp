#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ssad/data.hpp"

namespace ssad {

Tensor MaskSpec::pixel_mask() const {
  Tensor m({image_height(), image_width()});
  for (int cell : masked_indices) {
    const int r = cell / grid_cols, c = cell % grid_cols;
    for (int y = r * patch_size; y < (r + 1) * patch_size; ++y)
      for (int x = c * patch_size; x < (c + 1) * patch_size; ++x) m[static_cast<std::size_t>(y) * image_width() + x] = 1.0;
  }
  return m;
}

bool MaskSpec::is_masked(int cell) const {
  return std::binary_search(masked_indices.begin(), masked_indices.end(), cell);
}

MaskSpec generate_mask(int grid_rows, int grid_cols, double mask_rate, std::uint64_t seed, int patch_size) {
  if (grid_rows <= 0 || grid_cols <= 0) throw Error("mask grid has no cells");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw Error("mask rate must lie in (0, 1)");
  if (patch_size <= 0) throw Error("patch size must be positive");
  const int cells = grid_rows * grid_cols;
  const int count = static_cast<int>(std::floor(mask_rate * cells));

  std::vector<int> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, cells - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());
  return MaskSpec{grid_rows, grid_cols, patch_size, std::move(order), seed};
}

ImageBuffer apply_mask(const ImageBuffer& img, const MaskSpec& mask, MaskFill fill, std::span<const double> token) {
  if (img.height() != mask.image_height() || img.width() != mask.image_width()) {
    throw Error("mask geometry " + std::to_string(mask.image_height()) + "x" + std::to_string(mask.image_width()) +
                " does not match image " + std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
  std::vector<double> values(img.channels(), 0.0);
  if (fill == MaskFill::learned_token_value) {
    if (static_cast<int>(token.size()) != img.channels()) throw Error("mask token must hold one value per channel");
    values.assign(token.begin(), token.end());
  }
  Tensor out = img.tensor();
  const int p = mask.patch_size;
  for (int cell : mask.masked_indices) {
    const int r = cell / mask.grid_cols, c = cell % mask.grid_cols;
    for (int ch = 0; ch < img.channels(); ++ch)
      for (int y = r * p; y < (r + 1) * p; ++y)
        for (int x = c * p; x < (c + 1) * p; ++x) out.at(ch, y, x) = values[ch];
  }
  return image_from_tensor_clamped(std::move(out));
}

}  // namespace ssad

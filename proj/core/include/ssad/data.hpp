#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssad/boxes.hpp"
#include "ssad/image.hpp"

namespace ssad {

/// The three DENTEX detection tasks. Each declares the category vocabulary a
/// dataset may use.
enum class Task { quadrant, enumeration, disease };

std::string_view to_string(Task t);
Task parse_task(std::string_view s);
/// Canonical category names for the task, in dense-id order.
std::span<const std::string_view> task_categories(Task t);

struct AnnotationRecord {
  std::int64_t image_id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthBox> boxes;
  Task task = Task::disease;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Records plus the category table they index into.
struct CocoDataset {
  Task task = Task::disease;
  std::vector<std::string> category_names;
  /// Original file category id for each dense index.
  std::vector<std::int64_t> source_category_ids;
  std::vector<AnnotationRecord> records;

  int num_categories() const { return static_cast<int>(category_names.size()); }
};

/// Parses a COCO-style annotation file. Boxes are converted from (x, y, w, h)
/// to corners and categories remapped to dense 0-based ids in ascending id
/// order. DENTEX-style files carrying `categories_1/2/3` and
/// `category_id_1/2/3` are read using the table for `task`.
CocoDataset load_coco_annotations(const std::filesystem::path& path, Task task);

/// Writes the dataset as COCO JSON; dense ids are written as category ids.
void write_coco_annotations(const std::filesystem::path& path, const CocoDataset& dataset);

/// Bilinear resize (half-pixel centers) to target x target with per-axis box
/// scaling. `patch_size` must divide `target`.
std::pair<ImageBuffer, AnnotationRecord> resize_with_boxes(const ImageBuffer& img, const AnnotationRecord& record,
                                                           int target, int patch_size);
ImageBuffer resize_bilinear(const ImageBuffer& img, int out_height, int out_width);

/// Mirrors the image left-right and reflects the boxes.
std::pair<ImageBuffer, AnnotationRecord> horizontal_flip(const ImageBuffer& img, const AnnotationRecord& record);

/// Patch-grid mask: `masked_indices` are row-major cell indices, sorted.
struct MaskSpec {
  int grid_rows = 0;
  int grid_cols = 0;
  int patch_size = 0;
  std::vector<int> masked_indices;
  std::uint64_t seed = 0;

  int cells() const { return grid_rows * grid_cols; }
  int image_height() const { return grid_rows * patch_size; }
  int image_width() const { return grid_cols * patch_size; }
  /// Per-pixel (H, W) tensor with 1 for masked pixels, 0 elsewhere.
  Tensor pixel_mask() const;
  bool is_masked(int cell) const;
};

/// Chooses exactly floor(rate * rows * cols) distinct cells uniformly without
/// replacement; deterministic in `seed`.
MaskSpec generate_mask(int grid_rows, int grid_cols, double mask_rate, std::uint64_t seed, int patch_size = 1);

enum class MaskFill { zero, learned_token_value };

/// Replaces masked patches with zero (or, for learned_token_value, the given
/// per-channel token); every other pixel is copied bit-for-bit.
ImageBuffer apply_mask(const ImageBuffer& img, const MaskSpec& mask, MaskFill fill = MaskFill::zero,
                       std::span<const double> token = {});

struct ImageDataset {
  std::vector<ImageBuffer> images;
  CocoDataset annotations;
};

/// Procedural panoramic-like radiographs: a smooth background with a row of
/// rectangular "teeth". Healthy teeth carry a fine isotropic grain and are not
/// annotated; each annotated category carries its own stripe texture, so
/// category identity is only visible in texture.
ImageDataset synthesize_toy_dataset(int n_images, int image_size, int n_categories, std::uint64_t seed);

/// Writes images/<name>.png and annotations.json under `dir`.
void write_coco_layout(const std::filesystem::path& dir, const ImageDataset& dataset,
                       const std::string& annotation_name = "annotations.json");

/// Loads every image referenced by the annotation file. File names resolve
/// against `image_root`, defaulting to the annotation file's directory.
ImageDataset load_coco_layout(const std::filesystem::path& annotation_path, Task task,
                            const std::optional<std::filesystem::path>& image_root = std::nullopt);

}  // namespace ssad

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ssad/data.hpp"

namespace ssad {
namespace {

constexpr int kSlots = 4;
constexpr double kToothProbability = 0.6;
constexpr double kDiseaseProbability = 0.5;
constexpr double kStripeAmplitude = 0.09;
constexpr double kStripePeriod = 6.0;
constexpr double kGrainAmplitude = 0.05;
constexpr double kSensorNoise = 0.02;

std::string file_name_for(int index) {
  std::string digits = std::to_string(index);
  return "images/" + std::string(6 - std::min<std::size_t>(6, digits.size()), '0') + digits + ".png";
}

}  // namespace

ImageDataset synthesize_toy_dataset(int n_images, int image_size, int n_categories, std::uint64_t seed) {
  if (n_categories < 2) throw Error("toy dataset needs at least 2 categories");
  if (n_categories > 8) throw Error("toy dataset supports at most 8 categories");
  if (n_images < 0) throw Error("image count must be non-negative");
  if (image_size < kSlots * 8) throw Error("toy images must be at least 32 pixels");

  ImageDataset ds;
  ds.annotations.task = n_categories <= 4 ? Task::disease : Task::enumeration;
  const auto vocab = task_categories(ds.annotations.task);
  for (int k = 0; k < n_categories; ++k) {
    ds.annotations.category_names.emplace_back(vocab[k]);
    ds.annotations.source_category_ids.push_back(k);
  }

  const double slot = static_cast<double>(image_size) / kSlots;
  for (int i = 0; i < n_images; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Tensor px({1, image_size, image_size});
    const double phase = 2.0 * std::numbers::pi * u01(rng);
    const double tilt = 0.06 * (u01(rng) - 0.5);
    for (int y = 0; y < image_size; ++y) {
      for (int x = 0; x < image_size; ++x) {
        const double fx = static_cast<double>(x) / image_size, fy = static_cast<double>(y) / image_size;
        px.at(0, y, x) = 0.20 + 0.06 * std::sin(2.0 * std::numbers::pi * 0.8 * fx + phase) * std::cos(std::numbers::pi * fy) +
                         tilt * fy;
      }
    }

    AnnotationRecord rec;
    rec.image_id = i + 1;
    rec.file_name = file_name_for(i + 1);
    rec.width = image_size;
    rec.height = image_size;
    rec.task = ds.annotations.task;

    for (int sr = 0; sr < kSlots; ++sr) {
      for (int sc = 0; sc < kSlots; ++sc) {
        if (u01(rng) >= kToothProbability) continue;
        const int w = static_cast<int>(std::lround(slot * (0.45 + 0.35 * u01(rng))));
        const int h = static_cast<int>(std::lround(slot * (0.55 + 0.35 * u01(rng))));
        const int x0 = static_cast<int>(std::lround(sc * slot + (slot - w) * u01(rng)));
        const int y0 = static_cast<int>(std::lround(sr * slot + (slot - h) * u01(rng)));
        const bool diseased = u01(rng) < kDiseaseProbability;
        const int category = diseased ? static_cast<int>(u01(rng) * n_categories) % n_categories : -1;
        const double base = 0.55 + 0.16 * (u01(rng) - 0.5);
        const double theta = diseased ? std::numbers::pi * category / n_categories : 0.0;
        const double stripe_phase = 2.0 * std::numbers::pi * u01(rng);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (int y = y0; y < y0 + h; ++y) {
          for (int x = x0; x < x0 + w; ++x) {
            double v = base + kGrainAmplitude * (u01(rng) - 0.5) * 2.0;
            if (diseased) {
              const double t = (ct * x + st * y) * 2.0 * std::numbers::pi / kStripePeriod + stripe_phase;
              v += kStripeAmplitude * std::sin(t);
            }
            px.at(0, y, x) = v;
          }
        }
        if (diseased) {
          rec.boxes.push_back(GroundTruthBox{static_cast<double>(x0), static_cast<double>(y0),
                                             static_cast<double>(x0 + w), static_cast<double>(y0 + h), category});
        }
      }
    }
    for (double& v : px.values()) v += kSensorNoise * gauss(rng);
    ds.images.push_back(image_from_tensor_clamped(std::move(px)));
    ds.annotations.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace ssad

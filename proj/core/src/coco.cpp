#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "ssad/data.hpp"

namespace ssad {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 4> kQuadrants{"1", "2", "3", "4"};
constexpr std::array<std::string_view, 8> kTeeth{"1", "2", "3", "4", "5", "6", "7", "8"};
constexpr std::array<std::string_view, 4> kDiseases{"caries", "deep caries", "periapical lesion", "impacted"};

int task_suffix(Task t) {
  switch (t) {
    case Task::quadrant: return 1;
    case Task::enumeration: return 2;
    case Task::disease: return 3;
  }
  return 3;
}

double number(const json& j, const char* what) {
  if (!j.is_number()) throw Error(std::string("annotation field '") + what + "' is not a number");
  return j.get<double>();
}

}  // namespace

std::string_view to_string(Task t) {
  switch (t) {
    case Task::quadrant: return "quadrant";
    case Task::enumeration: return "enumeration";
    case Task::disease: return "disease";
  }
  return "disease";
}

Task parse_task(std::string_view s) {
  if (s == "quadrant") return Task::quadrant;
  if (s == "enumeration") return Task::enumeration;
  if (s == "disease") return Task::disease;
  throw Error("unknown task '" + std::string(s) + "' (expected quadrant, enumeration or disease)");
}

std::span<const std::string_view> task_categories(Task t) {
  switch (t) {
    case Task::quadrant: return kQuadrants;
    case Task::enumeration: return kTeeth;
    case Task::disease: return kDiseases;
  }
  return kDiseases;
}

CocoDataset load_coco_annotations(const std::filesystem::path& path, Task task) {
  std::ifstream in(path);
  if (!in) throw Error("annotation file not found: " + path.string());
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& e) {
    throw Error("malformed annotation JSON in " + path.string() + ": " + e.what());
  }
  if (!root.is_object() || !root.contains("images") || !root.contains("annotations")) {
    throw Error("annotation file lacks 'images' or 'annotations': " + path.string());
  }

  const std::string suffix = "_" + std::to_string(task_suffix(task));
  const std::string categories_key = root.contains("categories" + suffix) ? "categories" + suffix : "categories";
  const std::string category_field = root.contains("categories" + suffix) ? "category_id" + suffix : "category_id";
  if (!root.contains(categories_key) || !root[categories_key].is_array()) {
    throw Error("annotation file lacks a '" + categories_key + "' array");
  }

  CocoDataset ds;
  ds.task = task;
  std::vector<std::pair<std::int64_t, std::string>> cats;
  for (const auto& c : root[categories_key]) {
    cats.emplace_back(c.at("id").get<std::int64_t>(), c.value("name", std::to_string(c.at("id").get<std::int64_t>())));
  }
  std::sort(cats.begin(), cats.end());
  const auto vocab = task_categories(task);
  if (cats.size() > vocab.size()) {
    throw Error("task '" + std::string(to_string(task)) + "' allows at most " + std::to_string(vocab.size()) +
                " categories, file declares " + std::to_string(cats.size()));
  }
  std::map<std::int64_t, int> dense;
  for (const auto& [id, name] : cats) {
    if (!dense.emplace(id, static_cast<int>(ds.category_names.size())).second) {
      throw Error("duplicate category id " + std::to_string(id));
    }
    ds.category_names.push_back(name);
    ds.source_category_ids.push_back(id);
  }

  std::map<std::int64_t, std::size_t> by_image;
  for (const auto& im : root["images"]) {
    AnnotationRecord r;
    r.image_id = im.at("id").get<std::int64_t>();
    r.file_name = im.at("file_name").get<std::string>();
    r.width = im.at("width").get<int>();
    r.height = im.at("height").get<int>();
    r.task = task;
    if (r.width <= 0 || r.height <= 0) throw Error("image " + std::to_string(r.image_id) + " has empty extent");
    if (!by_image.emplace(r.image_id, ds.records.size()).second) {
      throw Error("duplicate image id " + std::to_string(r.image_id));
    }
    ds.records.push_back(std::move(r));
  }

  for (const auto& a : root["annotations"]) {
    const auto image_id = a.at("image_id").get<std::int64_t>();
    auto it = by_image.find(image_id);
    if (it == by_image.end()) throw Error("annotation references unknown image id " + std::to_string(image_id));
    if (!a.contains(category_field)) throw Error("annotation lacks '" + category_field + "'");
    const auto cat = a.at(category_field).get<std::int64_t>();
    auto cit = dense.find(cat);
    if (cit == dense.end()) {
      throw Error("annotation category " + std::to_string(cat) + " is outside the declared " +
                  std::string(to_string(task)) + " category set");
    }
    const auto& bbox = a.at("bbox");
    if (!bbox.is_array() || bbox.size() != 4) throw Error("annotation bbox must be [x, y, w, h]");
    AnnotationRecord& r = ds.records[it->second];
    const double x = number(bbox[0], "bbox"), y = number(bbox[1], "bbox");
    const double w = number(bbox[2], "bbox"), h = number(bbox[3], "bbox");
    GroundTruthBox b{x, y, x + w, y + h, cit->second};
    b.x_min = std::clamp(b.x_min, 0.0, static_cast<double>(r.width));
    b.x_max = std::clamp(b.x_max, 0.0, static_cast<double>(r.width));
    b.y_min = std::clamp(b.y_min, 0.0, static_cast<double>(r.height));
    b.y_max = std::clamp(b.y_max, 0.0, static_cast<double>(r.height));
    if (!b.valid()) throw Error("degenerate box in annotation for image " + std::to_string(image_id));
    r.boxes.push_back(b);
  }
  return ds;
}

void write_coco_annotations(const std::filesystem::path& path, const CocoDataset& dataset) {
  json root;
  root["info"] = {{"task", std::string(to_string(dataset.task))}};
  root["images"] = json::array();
  root["annotations"] = json::array();
  root["categories"] = json::array();
  std::int64_t ann_id = 1;
  for (const auto& r : dataset.records) {
    root["images"].push_back({{"id", r.image_id}, {"file_name", r.file_name}, {"width", r.width}, {"height", r.height}});
    for (const auto& b : r.boxes) {
      root["annotations"].push_back({{"id", ann_id++},
                                     {"image_id", r.image_id},
                                     {"category_id", b.category_id},
                                     {"bbox", {b.x_min, b.y_min, b.width(), b.height()}},
                                     {"area", b.area()},
                                     {"iscrowd", 0}});
    }
  }
  for (int i = 0; i < dataset.num_categories(); ++i) {
    root["categories"].push_back({{"id", i}, {"name", dataset.category_names[i]}});
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write annotation file: " + path.string());
  out << root.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

void write_coco_layout(const std::filesystem::path& dir, const ImageDataset& dataset,
                       const std::string& annotation_name) {
  if (dataset.images.size() != dataset.annotations.records.size()) {
    throw Error("image and annotation counts differ");
  }
  std::filesystem::create_directories(dir / "images");
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    write_png(dir / dataset.annotations.records[i].file_name, dataset.images[i]);
  }
  write_coco_annotations(dir / annotation_name, dataset.annotations);
}

ImageDataset load_coco_layout(const std::filesystem::path& annotation_path, Task task,
                              const std::optional<std::filesystem::path>& image_root) {
  ImageDataset ds;
  ds.annotations = load_coco_annotations(annotation_path, task);
  const auto root = image_root.value_or(annotation_path.parent_path());
  ds.images.reserve(ds.annotations.records.size());
  for (const auto& r : ds.annotations.records) {
    auto img = read_image(root / r.file_name);
    if (img.width() != r.width || img.height() != r.height) {
      throw Error("image " + r.file_name + " is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                  " but annotations declare " + std::to_string(r.width) + "x" + std::to_string(r.height));
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

}  // namespace ssad

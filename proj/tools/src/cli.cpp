#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "render.hpp"
#include "run_support.hpp"
#include "ssad/config.hpp"
#include "ssad/evaluation.hpp"
#include "ssad/trainer.hpp"

namespace ssad::tools {
namespace fs = std::filesystem;
namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string paradigm;
  bool force = false;
};

struct Context {
  std::string command;
  CommonFlags flags;
  RunConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> argv;
};

void resolve(Context& ctx) {
  if (!ctx.flags.config_path.empty()) ctx.config = load_run_config(ctx.flags.config_path);
  if (ctx.flags.seed) ctx.config.train.seed = *ctx.flags.seed;
  if (!ctx.flags.paradigm.empty()) {
    try {
      ctx.config.train.paradigm = parse_paradigm(ctx.flags.paradigm);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  ctx.seed = ctx.config.train.seed;
  ctx.config.validate();
}

RunManifest begin_manifest(const Context& ctx, const fs::path& out) {
  RunManifest m;
  m.command = ctx.command;
  m.config_path = ctx.flags.config_path;
  m.config = ctx.config.to_json();
  m.config_hash = sha256_hex(m.config.dump());
  m.seed = ctx.seed;
  m.output_dir = out;
  m.argv = ctx.argv;
  m.started_at = utc_timestamp();
  return m;
}

void finish_manifest(RunManifest& m) {
  m.finished_at = utc_timestamp();
  m.write();
}

fs::path require_out(const Context& ctx) {
  if (ctx.flags.out.empty()) throw UsageError(ctx.command + " needs --out");
  return ctx.flags.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

ImageDataset load_split(const fs::path& data_dir, const RunConfig& config, bool train_split) {
  const fs::path ann = data_dir / (train_split ? config.data.train_annotations : config.data.test_annotations);
  std::optional<fs::path> root;
  if (!config.data.image_root.empty()) root = fs::path(config.data.image_root);
  return load_coco_layout(ann, config.data.task, root);
}

struct LoadedDetector {
  DetectorHandle detector;
  int image_size = 0;
  std::vector<std::string> category_names;
};

LoadedDetector load_any_detector(fs::path path) {
  if (fs::is_directory(path)) path /= "detector.ssad";
  const auto archive = nn::Archive::load(path);
  LoadedDetector out;
  if (archive.metadata.value("archive", "") == "checkpoint") {
    auto c = load_checkpoint(path);
    out.detector = c.model.detector;
    out.image_size = c.config.image_size;
    out.category_names = c.model.category_names;
  } else {
    out.detector = load_detector(path);
    out.image_size = archive.metadata.value("image_size", 0);
    out.category_names = archive.metadata.value("category_names", std::vector<std::string>{});
  }
  if (out.image_size <= 0) throw Error("archive " + path.string() + " does not record its input size");
  return out;
}

/// Detects at the model's input size and maps boxes back to the image's own
/// pixel grid.
std::vector<Detection> detect_original(const LoadedDetector& d, const ImageBuffer& img, const EvalConfig& eval) {
  const bool same = img.width() == d.image_size && img.height() == d.image_size;
  const ImageBuffer resized = same ? img : resize_bilinear(img, d.image_size, d.image_size);
  auto dets = d.detector->detect(resized, eval.score_threshold, eval.nms_iou);
  if (!same) {
    const double sx = static_cast<double>(img.width()) / d.image_size;
    const double sy = static_cast<double>(img.height()) / d.image_size;
    for (auto& det : dets) {
      det.box.x_min *= sx;
      det.box.x_max *= sx;
      det.box.y_min *= sy;
      det.box.y_max *= sy;
    }
  }
  return dets;
}

eval::MetricReport evaluate_detector(const LoadedDetector& d, const ImageDataset& test, const EvalConfig& eval,
                               std::vector<std::vector<Detection>>* predictions = nullptr) {
  std::vector<std::vector<Detection>> preds;
  preds.reserve(test.images.size());
  for (const auto& img : test.images) preds.push_back(detect_original(d, img, eval));
  auto report = eval::map_suite(preds, eval::ground_truth_boxes(test.annotations), test.annotations.category_names,
                                eval.confusion_threshold);
  if (predictions) *predictions = std::move(preds);
  return report;
}

void print_report(const std::string& label, const eval::MetricReport& r) {
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream os;
    if (v) os << std::fixed << std::setprecision(4) << *v;
    else os << "n/a";
    return os.str();
  };
  std::cout << std::fixed << std::setprecision(4) << label << " AP50=" << r.ap50 << " AP75=" << r.ap75
            << " AP50:95=" << r.ap50_95 << " paper_auc=" << opt(r.paper_auc) << " specificity=" << opt(r.specificity)
            << '\n';
}

// ---- synth -----------------------------------------------------------------

int cmd_synth(Context& ctx) {
  resolve(ctx);
  const fs::path out = require_out(ctx);
  prepare_output_dir(out, ctx.flags.force);
  DirectoryLock lock(out);
  auto manifest = begin_manifest(ctx, out);
  const auto& s = ctx.config.synth;
  auto ds = synthesize_toy_dataset(s.n_train + s.n_test, s.image_size, s.n_categories, ctx.seed);
  write_coco_layout(out, ds, "annotations.json");
  CocoDataset train = ds.annotations, test = ds.annotations;
  train.records.assign(ds.annotations.records.begin(), ds.annotations.records.begin() + s.n_train);
  test.records.assign(ds.annotations.records.begin() + s.n_train, ds.annotations.records.end());
  write_coco_annotations(out / ctx.config.data.train_annotations, train);
  write_coco_annotations(out / ctx.config.data.test_annotations, test);
  finish_manifest(manifest);
  std::cout << "wrote " << ds.images.size() << " images (" << s.n_train << " train / " << s.n_test << " test, "
            << s.n_categories << " categories) to " << out.string() << '\n';
  return 0;
}

// ---- train -----------------------------------------------------------------

struct RunOutcome {
  TrainResult result;
  eval::MetricReport report;
};

RunOutcome train_and_evaluate(const RunConfig& config, const ImageDataset& train_set, const ImageDataset& test_set,
                              const fs::path& run_dir) {
  fs::create_directories(run_dir);
  TrainOptions opts;
  opts.out_dir = run_dir;
  opts.on_epoch = [](const EpochLog& e) {
    std::cerr << "  [" << e.phase << "] epoch " << e.epoch << " total=" << std::setprecision(5) << e.mean.total
              << '\n';
  };
  RunOutcome out;
  out.result = train(train_set, config.train, opts);
  write_text(run_dir / "config.ini", to_ini(config));
  LoadedDetector d{out.result.model.detector, config.train.image_size, out.result.model.category_names};
  if (!test_set.images.empty()) {
    out.report = evaluate_detector(d, test_set, config.eval);
    eval::write_report(run_dir / "report.json", out.report);
  }
  return out;
}

ImageDataset prepared_train_set(const fs::path& data_dir, const RunConfig& config) {
  return resize_dataset(load_split(data_dir, config, true), config.train.image_size, 32);
}

int cmd_train(Context& ctx, const std::string& data_dir, bool evaluate) {
  resolve(ctx);
  const fs::path out = require_out(ctx);
  prepare_output_dir(out, ctx.flags.force);
  DirectoryLock lock(out);
  auto manifest = begin_manifest(ctx, out);
  const auto train_set = prepared_train_set(data_dir, ctx.config);
  ImageDataset test_set;
  if (evaluate) test_set = load_split(data_dir, ctx.config, false);
  std::cout << "training " << to_string(ctx.config.train.paradigm) << " on " << train_set.images.size()
            << " images, seed " << ctx.seed << '\n';
  const auto outcome = train_and_evaluate(ctx.config, train_set, test_set, out);
  std::cout << std::fixed << std::setprecision(2) << "train time " << outcome.result.total_seconds() << " s\n";
  if (evaluate) print_report("test", outcome.report);
  finish_manifest(manifest);
  return 0;
}

// ---- eval ------------------------------------------------------------------

int cmd_eval(Context& ctx, const std::string& checkpoint, const std::string& results, const std::string& data_dir,
             const std::string& split, bool pr_curves) {
  resolve(ctx);
  if (checkpoint.empty() == results.empty()) throw UsageError("eval needs exactly one of --checkpoint or --results");
  if (split != "train" && split != "test") throw UsageError("--split must be train or test");
  const fs::path out = require_out(ctx);
  prepare_output_dir(out, ctx.flags.force);
  DirectoryLock lock(out);
  auto manifest = begin_manifest(ctx, out);

  std::vector<std::vector<Detection>> preds;
  CocoDataset annotations;
  if (!checkpoint.empty()) {
    const auto data = load_split(data_dir, ctx.config, split == "train");
    annotations = data.annotations;
    const auto d = load_any_detector(checkpoint);
    evaluate_detector(d, data, ctx.config.eval, &preds);
    eval::write_coco_results(out / "detections.json", annotations, preds);
  } else {
    const fs::path ann = fs::path(data_dir) / (split == "train" ? ctx.config.data.train_annotations
                                                                 : ctx.config.data.test_annotations);
    annotations = load_coco_annotations(ann, ctx.config.data.task);
    preds = eval::read_coco_results(results, annotations);
  }
  const auto gts = eval::ground_truth_boxes(annotations);
  const auto report = eval::map_suite(preds, gts, annotations.category_names, ctx.config.eval.confusion_threshold);
  eval::write_report(out / "report.json", report);
  if (pr_curves) {
    for (int c = 0; c < annotations.num_categories(); ++c) {
      const auto curve = eval::category_pr_curve(preds, gts, c, 0.5);
      std::string name = annotations.category_names[c];
      for (char& ch : name)
        if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
      eval::write_pr_curve_svg(out / ("pr_" + std::to_string(c) + "_" + name + ".svg"), curve,
                               annotations.category_names[c] + " (IoU 0.5)");
    }
  }
  print_report(split, report);
  finish_manifest(manifest);
  return 0;
}

// ---- compare-paradigms / bench-extractors -------------------------------------

struct Variant {
  std::string id;
  std::string paradigm;
  std::string tc;
  RunConfig config;
};

std::string seed_dir(const std::string& id, std::uint64_t seed) { return id + "_seed" + std::to_string(seed); }

std::vector<std::uint64_t> seeds_for(const Context& ctx) {
  if (ctx.flags.seed) return {*ctx.flags.seed};
  return {ctx.config.compare.seeds.begin(), ctx.config.compare.seeds.end()};
}

int cmd_compare(Context& ctx, const std::string& data_dir) {
  resolve(ctx);
  const fs::path out = require_out(ctx);
  prepare_output_dir(out, ctx.flags.force);
  DirectoryLock lock(out);
  auto manifest = begin_manifest(ctx, out);

  std::vector<Variant> variants;
  for (const auto& p : ctx.config.compare.paradigms) {
    Variant v{p, p, "-", ctx.config};
    v.config.train.paradigm = parse_paradigm(p);
    if (v.config.train.paradigm != Paradigm::detection_only) v.tc = v.config.train.weights.tc != 0.0 ? "yes" : "no";
    variants.push_back(v);
  }
  if (ctx.config.compare.tc_ablation) {
    Variant v{"ssad_no_tc", "ssad", "no", ctx.config};
    v.config.train.paradigm = Paradigm::ssad;
    v.config.train.weights.tc = 0.0;
    const bool duplicate = std::any_of(variants.begin(), variants.end(), [](const Variant& x) {
      return x.paradigm == "ssad" && x.tc == "no";
    });
    if (!duplicate) variants.push_back(v);
  }

  const auto train_set = prepared_train_set(data_dir, ctx.config);
  const auto test_set = load_split(data_dir, ctx.config, false);
  const auto seeds = seeds_for(ctx);

  std::map<std::string, std::vector<eval::MetricReport>> reports;
  nlohmann::json per_seed = nlohmann::json::array();
  std::ostringstream per_seed_csv, timing_csv;
  per_seed_csv << std::setprecision(17) << "variant,seed,AP50_95,AP50,AP75\n";
  timing_csv << std::setprecision(6) << "variant,seed,phase,epochs,seconds\n";
  for (const auto seed : seeds) {
    for (auto v : variants) {
      v.config.train.seed = seed;
      std::cout << "== " << v.id << " seed " << seed << '\n';
      const auto outcome = train_and_evaluate(v.config, train_set, test_set, out / "runs" / seed_dir(v.id, seed));
      reports[v.id].push_back(outcome.report);
      print_report("   " + v.id, outcome.report);
      per_seed_csv << v.id << ',' << seed << ',' << outcome.report.ap50_95 << ',' << outcome.report.ap50 << ','
                   << outcome.report.ap75 << '\n';
      per_seed.push_back({{"variant", v.id}, {"seed", seed}, {"report", outcome.report.to_json()}});
      for (const auto& p : outcome.result.phases) {
        timing_csv << v.id << ',' << seed << ',' << p.name << ',' << p.epochs.size() << ',' << p.seconds() << '\n';
      }
      timing_csv << v.id << ',' << seed << ",total,," << outcome.result.total_seconds() << '\n';
    }
  }

  std::vector<eval::ComparisonRow> rows, tc_rows;
  nlohmann::json rows_json = nlohmann::json::array(), tc_rows_json = nlohmann::json::array();
  for (const auto& v : variants) {
    eval::ComparisonRow row{v.paradigm, "center_cell", v.tc, eval::mean_report(reports[v.id]),
                            static_cast<int>(reports[v.id].size())};
    const nlohmann::json row_json{{"variant", v.id},         {"paradigm", row.paradigm}, {"method", row.method},
                                  {"tc_loss", row.tc_loss},   {"runs", row.runs},
                                  {"report", row.report.to_json()}};
    rows.push_back(row);
    rows_json.push_back(row_json);
    if (v.paradigm == "ssad") {
      tc_rows.push_back(row);
      tc_rows_json.push_back(row_json);
    }
  }
  nlohmann::json summary{{"seeds", seeds}, {"rows", rows_json}, {"per_seed", per_seed}};
  if (reports.count("ssad") && reports.count("detection_only")) {
    nlohmann::json diffs = nlohmann::json::array();
    double sum = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const double d = reports["ssad"][i].ap50 - reports["detection_only"][i].ap50;
      diffs.push_back({{"seed", seeds[i]}, {"ssad_minus_detection_only_ap50", d}});
      sum += d;
    }
    summary["ssad_vs_detection_only"] = {{"per_seed", diffs}, {"mean_ap50_margin", sum / seeds.size()}};
  }
  write_text(out / "comparison.csv", eval::comparison_csv(rows));
  write_text(out / "comparison.txt", eval::comparison_text(rows));
  if (tc_rows.size() >= 2) {
    write_text(out / "tc_ablation.csv", eval::comparison_csv(tc_rows));
    write_text(out / "tc_ablation.txt", eval::comparison_text(tc_rows));
    nlohmann::json tc_per_seed = nlohmann::json::array();
    for (const auto& e : per_seed)
      if (e["variant"] == "ssad" || e["variant"] == "ssad_no_tc") tc_per_seed.push_back(e);
    write_text(out / "tc_ablation.json",
               nlohmann::json{{"seeds", seeds}, {"rows", tc_rows_json}, {"per_seed", tc_per_seed}}.dump(2) + "\n");
  }
  write_text(out / "per_seed.csv", per_seed_csv.str());
  write_text(out / "timing.csv", timing_csv.str());
  write_text(out / "comparison.json", summary.dump(2) + "\n");
  std::cout << '\n' << eval::comparison_text(rows);
  finish_manifest(manifest);
  return 0;
}

int cmd_bench_extractors(Context& ctx, const std::string& data_dir) {
  resolve(ctx);
  const fs::path out = require_out(ctx);
  prepare_output_dir(out, ctx.flags.force);
  DirectoryLock lock(out);
  auto manifest = begin_manifest(ctx, out);
  const auto train_set = prepared_train_set(data_dir, ctx.config);
  const auto test_set = load_split(data_dir, ctx.config, false);

  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream csv;
  csv << std::setprecision(17) << "extractor,status,dim,AP50_95,AP50,AP75\n";
  for (const auto& name : ctx.config.compare.extractors) {
    RunConfig c = ctx.config;
    c.train.paradigm = Paradigm::ssad;
    c.train.extractor = name;
    if (!extractor_available(name)) {
      std::cout << "== " << name << ": unavailable (no bundled weights)\n";
      rows.push_back({{"extractor", name}, {"status", "unavailable"}, {"report", nullptr}});
      csv << name << ",unavailable,,,,\n";
      continue;
    }
    ExtractorOptions eo;
    eo.in_channels = train_set.images.front().channels();
    const int dim = make_extractor(name, eo)->dim();
    std::cout << "== " << name << " (dim " << dim << ")\n";
    const auto outcome = train_and_evaluate(c, train_set, test_set, out / "runs" / name);
    print_report("   " + name, outcome.report);
    rows.push_back({{"extractor", name}, {"status", "ok"}, {"dim", dim}, {"report", outcome.report.to_json()}});
    csv << name << ",ok," << dim << ',' << outcome.report.ap50_95 << ',' << outcome.report.ap50 << ','
        << outcome.report.ap75 << '\n';
  }
  write_text(out / "extractors.csv", csv.str());
  write_text(out / "extractors.json", nlohmann::json{{"seed", ctx.seed}, {"rows", rows}}.dump(2) + "\n");
  finish_manifest(manifest);
  return 0;
}

// ---- reconstruct-preview / overlay --------------------------------------------

int cmd_reconstruct_preview(Context& ctx, const std::string& checkpoint, const std::string& data_dir, int count,
                            int scale) {
  resolve(ctx);
  const fs::path out = require_out(ctx);
  if (checkpoint.empty()) throw UsageError("reconstruct-preview needs --checkpoint");
  if (count <= 0) throw UsageError("--count must be positive");
  prepare_output_dir(out, ctx.flags.force);
  DirectoryLock lock(out);
  auto manifest = begin_manifest(ctx, out);

  fs::path path = checkpoint;
  if (fs::is_directory(path)) path /= fs::exists(path / "phase1_ssl") ? "phase1_ssl/checkpoint.ssad" : "checkpoint.ssad";
  const auto c = load_checkpoint(path);
  if (!c.model.reconstruction) throw Error("checkpoint " + path.string() + " has no reconstruction branch");
  const auto& branch = *c.model.reconstruction;
  const auto data = resize_dataset(load_split(data_dir, ctx.config, false), c.config.image_size, 32);
  const int patch = c.config.mask_patch, grid = c.config.image_size / patch;

  nlohmann::json items = nlohmann::json::array();
  for (int i = 0; i < std::min<int>(count, static_cast<int>(data.images.size())); ++i) {
    const auto& img = data.images[i];
    const auto& rec = data.annotations.records[i];
    const auto mask = generate_mask(grid, grid, c.config.mask_rate, mask_seed(ctx.seed, 0, rec.image_id), patch);
    const auto result = branch.reconstruct(img, mask);
    Tape tape(false);
    const auto masked = image_from_tensor_clamped(tape.value(branch.masked_image(tape, img, mask)));
    const std::string name = "preview_" + std::to_string(rec.image_id) + ".png";
    write_triptych(out / name, img, masked, result.image, scale);
    items.push_back({{"image_id", rec.image_id}, {"file", name}, {"recon_loss", result.loss_recon}});
  }
  write_text(out / "previews.json", items.dump(2) + "\n");
  std::cout << "wrote " << items.size() << " triptychs to " << out.string() << '\n';
  finish_manifest(manifest);
  return 0;
}

int cmd_overlay(Context& ctx, const std::string& checkpoint, const std::vector<std::string>& images,
                const std::string& annotations, int scale) {
  resolve(ctx);
  const fs::path out = require_out(ctx);
  if (checkpoint.empty()) throw UsageError("overlay needs --checkpoint");
  if (images.empty()) throw UsageError("overlay needs at least one image");
  prepare_output_dir(out, ctx.flags.force);
  DirectoryLock lock(out);
  auto manifest = begin_manifest(ctx, out);
  const auto d = load_any_detector(checkpoint);

  std::map<std::string, std::vector<GroundTruthBox>> gt_by_file;
  std::vector<std::string> names = d.category_names;
  if (!annotations.empty()) {
    const auto ann = load_coco_annotations(annotations, ctx.config.data.task);
    for (const auto& r : ann.records) gt_by_file[fs::path(r.file_name).filename().string()] = r.boxes;
    if (names.empty()) names = ann.category_names;
  }

  nlohmann::json items = nlohmann::json::array();
  for (const auto& p : images) {
    const auto img = read_image(p);
    const auto dets = detect_original(d, img, ctx.config.eval);
    const auto key = fs::path(p).filename().string();
    const auto it = gt_by_file.find(key);
    const std::string name = fs::path(p).stem().string() + "_overlay.png";
    const auto r = write_overlay(out / name, img, dets, names, it == gt_by_file.end() ? nullptr : &it->second,
                                 {std::max(1, scale), true});
    items.push_back({{"image", p}, {"file", name}, {"detections", r.detection_boxes}, {"ground_truth", r.ground_truth_boxes}});
  }
  write_text(out / "overlays.json", items.dump(2) + "\n");
  std::cout << "wrote " << items.size() << " overlays to " << out.string() << '\n';
  finish_manifest(manifest);
  return 0;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool paradigm) {
  cmd->add_option("--config", f.config_path, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Random seed (default 0)");
  cmd->add_option("--out", f.out, "Output directory")->required();
  if (paradigm) cmd->add_option("--paradigm", f.paradigm, "ssad, detection_only or ssl_then_ft");
  cmd->add_flag("--force", f.force, "Write into a non-empty output directory");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Self-supervised auxiliary detection toolkit"};
  app.require_subcommand(1);
  Context ctx;
  ctx.argv = args;

  std::string data_dir, checkpoint, results, split = "test", annotations;
  std::vector<std::string> images;
  bool pr_curves = false, no_eval = false;
  int count = 4, scale = 0;

  auto* synth = app.add_subcommand("synth", "Write a synthetic texture dataset in COCO layout");
  add_common(synth, ctx.flags, false);

  auto* train_cmd = app.add_subcommand("train", "Train under one paradigm");
  add_common(train_cmd, ctx.flags, true);
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_flag("--no-eval", no_eval, "Skip the test-split evaluation");

  auto* eval_cmd = app.add_subcommand("eval", "Score a detector or a COCO results file");
  add_common(eval_cmd, ctx.flags, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "detector.ssad, checkpoint.ssad or a run directory");
  eval_cmd->add_option("--results", results, "COCO results JSON")->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--split", split, "train or test");
  eval_cmd->add_flag("--pr-curves", pr_curves, "Write one PR-curve SVG per category");

  auto* compare = app.add_subcommand("compare-paradigms", "Train and score every paradigm and the TC ablation");
  add_common(compare, ctx.flags, false);
  compare->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);

  auto* bench = app.add_subcommand("bench-extractors", "Detection AP per texture extractor");
  add_common(bench, ctx.flags, false);
  bench->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);

  auto* preview = app.add_subcommand("reconstruct-preview", "Input | masked | reconstruction triptychs");
  add_common(preview, ctx.flags, false);
  preview->add_option("--checkpoint", checkpoint, "checkpoint.ssad or run directory")->required();
  preview->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  preview->add_option("--count", count, "Number of test images");
  preview->add_option("--scale", scale, "Upscale factor");

  auto* overlay = app.add_subcommand("overlay", "Draw detections on images");
  add_common(overlay, ctx.flags, false);
  overlay->add_option("--checkpoint", checkpoint, "detector.ssad, checkpoint.ssad or run directory")->required();
  overlay->add_option("--annotations", annotations, "COCO annotations for ground-truth boxes")
      ->check(CLI::ExistingFile);
  overlay->add_option("--scale", scale, "Upscale factor");
  overlay->add_option("images", images, "Image files")->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv;
  argv.push_back("ssad");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      ctx.command = "synth";
      return cmd_synth(ctx);
    }
    if (train_cmd->parsed()) {
      ctx.command = "train";
      return cmd_train(ctx, data_dir, !no_eval);
    }
    if (eval_cmd->parsed()) {
      ctx.command = "eval";
      return cmd_eval(ctx, checkpoint, results, data_dir, split, pr_curves);
    }
    if (compare->parsed()) {
      ctx.command = "compare-paradigms";
      return cmd_compare(ctx, data_dir);
    }
    if (bench->parsed()) {
      ctx.command = "bench-extractors";
      return cmd_bench_extractors(ctx, data_dir);
    }
    if (preview->parsed()) {
      ctx.command = "reconstruct-preview";
      return cmd_reconstruct_preview(ctx, checkpoint, data_dir, count, scale > 0 ? scale : 2);
    }
    if (overlay->parsed()) {
      ctx.command = "overlay";
      return cmd_overlay(ctx, checkpoint, images, annotations, scale > 0 ? scale : 1);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args);
}

}  // namespace ssad::tools

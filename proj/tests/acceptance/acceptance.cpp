// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.
//
//   ssad_acceptance [--only 1,4,7] [--work DIR]

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "metric_fixture.hpp"
#include "oracles.hpp"
#include "schema.hpp"
#include "ssad/evaluation.hpp"
#include "ssad/texture.hpp"
#include "ssad/trainer.hpp"

namespace fs = std::filesystem;
using namespace ssad;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

fs::path g_work;

bool close_rel(double a, double b, double rtol) { return std::fabs(a - b) <= rtol * std::max(std::fabs(b), 1e-300); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

int cli(std::vector<std::string> args) { return tools::run_cli(args); }

void require_cli(std::vector<std::string> args) {
  std::string joined;
  for (const auto& a : args) joined += " " + a;
  if (cli(args) != 0) throw Error("command failed:" + joined);
}

RunConfig toy_config() { return load_run_config(fixtures::source_dir() / "configs/toy.ini"); }

fs::path write_config(const RunConfig& c, const std::string& name) {
  const auto p = g_work / name;
  fixtures::write_file(p, to_ini(c));
  return p;
}

// The toy corpus shared by the directional criteria: 500 train / 100 test,
// 3 texture categories, synthesized once per work directory.
fs::path toy_data() {
  const auto dir = g_work / "toy_data";
  if (!fs::exists(dir / "test.json")) {
    require_cli({"synth", "--config", (fixtures::source_dir() / "configs/toy.ini").string(), "--out", dir.string(),
                 "--force"});
  }
  return dir;
}

std::vector<double> random_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = n(rng);
  return v;
}

// ---- 1 -----------------------------------------------------------------------

Outcome loss_oracles() {
  constexpr double rtol = 1e-6;
  constexpr int trials = 200;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(2, 64);
  std::map<std::string, int> checked, failed;
  auto tally = [&](const std::string& name, bool ok) {
    ++checked[name];
    if (!ok) ++failed[name];
  };

  for (int t = 0; t < trials; ++t) {
    const int d = dim(rng);
    const auto a = random_vector(rng, d), b = random_vector(rng, d);
    const EmbeddingVector va{a}, vb{b};
    const double align = oracle::alignment(a, b), gather = oracle::gather(a, b);
    tally("feature_alignment_loss", close_rel(feature_alignment_loss(va, vb), align, rtol));
    tally("feature_gather_loss", close_rel(feature_gather_loss(va, vb), gather, rtol));
    const auto tc = tc_loss(va, vb);
    tally("tc_loss", close_rel(tc.total, align + gather, rtol) && close_rel(tc.align, align, rtol) &&
                         close_rel(tc.gather, gather, rtol));
  }

  std::uniform_int_distribution<int> grid(2, 6), patch(2, 8), chan(0, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0), rate(0.05, 0.95);
  for (int t = 0; t < trials; ++t) {
    const int rows = grid(rng), cols = grid(rng), p = patch(rng), c = chan(rng) ? 3 : 1;
    ImageBuffer orig(c, rows * p, cols * p), rec(c, rows * p, cols * p);
    for (double& v : orig.mutable_tensor().values()) v = u(rng);
    for (double& v : rec.mutable_tensor().values()) v = u(rng);
    double r = rate(rng);
    if (std::floor(r * rows * cols) == 0.0) r = 0.9;
    const auto mask = generate_mask(rows, cols, r, rng(), p);
    tally("recon_loss", close_rel(recon_loss(orig, rec, mask), oracle::masked_l1(orig, rec, mask), rtol));
  }

  std::normal_distribution<double> logit(0.0, 3.0);
  for (int t = 0; t < trials; ++t) {
    const int rows = grid(rng), cols = grid(rng), stride = 16, k = 1 + t % 4;
    AnnotationRecord r;
    r.width = cols * stride;
    r.height = rows * stride;
    for (int b = 0; b < t % 5; ++b) {
      const double x0 = u(rng) * (r.width - 4), y0 = u(rng) * (r.height - 4);
      r.boxes.push_back({x0, y0, std::min<double>(r.width, x0 + 2 + u(rng) * 30),
                         std::min<double>(r.height, y0 + 2 + u(rng) * 30), static_cast<int>(rng() % k)});
    }
    const auto targets = assign_targets(r, {rows, cols, stride}, k);
    HeadOutputs out{Tensor({k + 1, rows, cols}), Tensor({4, rows, cols})};
    for (double& v : out.cls_logits.values()) v = logit(rng);
    for (double& v : out.regression.values()) v = logit(rng);
    const auto got = det_loss(out, targets);
    const auto ref = oracle::det_loss(out.cls_logits, out.regression, targets.labels, targets.offsets, k);
    tally("det_loss", close_rel(got.cls, ref.cls, rtol) && (ref.reg == 0.0 ? got.reg == 0.0 : close_rel(got.reg, ref.reg, rtol)));
  }

  std::ostringstream os;
  bool ok = true;
  for (const auto& [name, n] : checked) {
    os << name << " " << n - failed[name] << "/" << n << "; ";
    ok = ok && failed[name] == 0 && n >= 100;
  }
  return {ok, os.str() + "rtol " + fmt(rtol, 7)};
}

// ---- 2 -----------------------------------------------------------------------

Outcome gradient_checks() {
  const auto data = fixtures::tiny_dataset(2, 64, 5);
  auto c = fixtures::tiny_config();
  c.mask_fill = MaskFill::learned_token_value;
  const auto m = build_model(c, 3);
  m.reconstruction->decoder_parameters().back()->value[0] = 0.4;
  // Evaluate away from the ReLU kinks that zero-initialized biases create.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (const auto& p : all_parameters(m))
    if (p->name.ends_with(".bias"))
      for (double& v : p->value.values()) v += jitter(rng);

  const TrainSample s{&data.images[0], &data.annotations.records[0]};
  auto loss = [&] {
    Tape tape(false);
    return tape.value(record_losses(tape, m, c, s, 1, true, true).total).item();
  };
  auto analytic = [&] {
    Tape tape;
    tape.backward(record_losses(tape, m, c, s, 1, true, true).total);
  };
  gradcheck::Options o;
  o.rtol = 1e-3;
  o.atol = 1e-5;
  o.per_tensor = 16;

  const std::vector<std::pair<std::string, ParameterList>> groups{
      {"encoder", m.encoder->parameters()},
      {"decoder+mask_token", m.reconstruction->decoder_parameters()},
      {"detector_heads", m.detector->head_parameters()}};
  std::ostringstream os;
  bool ok = true;
  for (const auto& [name, params] : groups) {
    const auto r = gradcheck::check_parameters(params, loss, analytic, o);
    os << name << " " << r.checked - r.failed << "/" << r.checked << "; ";
    if (!r.ok()) os << "first failure " << r.first_failure << "; ";
    ok = ok && r.ok();
  }
  // The frozen extractor must receive no update.
  analytic();
  for (const auto& p : m.extractor->parameters())
    for (double g : p->grad.values()) ok = ok && g == 0.0;
  return {ok, os.str() + "64x64 input, all four loss weights 1"};
}

// ---- 3 -----------------------------------------------------------------------

Outcome masking_exactness() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> side(1, 24), patch(1, 6);
  std::uniform_real_distribution<double> rate(0.0, 1.0), u(0.0, 1.0);
  int count_ok = 0, preserve_ok = 0;
  constexpr int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const int rows = side(rng), cols = side(rng), p = patch(rng);
    double r = rate(rng);
    if (r == 0.0) r = 0.5;
    const auto mask = generate_mask(rows, cols, r, rng(), p);
    const auto expected = static_cast<std::size_t>(std::floor(r * rows * cols));
    std::set<int> distinct(mask.masked_indices.begin(), mask.masked_indices.end());
    if (mask.masked_indices.size() == expected && distinct.size() == expected) ++count_ok;

    ImageBuffer img(t % 2 ? 3 : 1, rows * p, cols * p);
    for (double& v : img.mutable_tensor().values()) v = u(rng);
    const auto out = apply_mask(img, mask);
    bool same = true;
    for (int ch = 0; ch < img.channels(); ++ch)
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
          const bool masked = distinct.count((y / p) * cols + x / p) != 0;
          const double a = img.at(ch, y, x), b = out.at(ch, y, x);
          same = same && (masked ? b == 0.0 : std::memcmp(&a, &b, sizeof a) == 0);
        }
    if (same) ++preserve_ok;
  }
  return {count_ok == trials && preserve_ok == trials,
          "count exact " + std::to_string(count_ok) + "/" + std::to_string(trials) + ", unmasked bits preserved " +
              std::to_string(preserve_ok) + "/" + std::to_string(trials)};
}

// ---- 4 -----------------------------------------------------------------------

Outcome metric_oracle() {
  const auto f = metric_fixture::build();
  const auto r = eval::map_suite(f.predictions, f.ground_truths, f.names, 0.5);
  const double ref50 = oracle::mean_ap(f.predictions, f.ground_truths, 2, 0.5);
  const double ref75 = oracle::mean_ap(f.predictions, f.ground_truths, 2, 0.75);
  const double ref5095 = oracle::map_50_95(f.predictions, f.ground_truths, 2);
  const bool aps = std::fabs(r.ap50 - ref50) <= 1e-6 && std::fabs(r.ap75 - ref75) <= 1e-6 &&
                   std::fabs(r.ap50_95 - ref5095) <= 1e-6;
  using namespace metric_fixture;
  const double hand_auc = static_cast<double>(kTp + kTn) / static_cast<double>(kTp + kFp + kFn + kTn);
  const double hand_spec = static_cast<double>(kTn) / static_cast<double>(kTn + kFp);
  const bool counts = r.counts.tp == kTp && r.counts.fp == kFp && r.counts.fn == kFn && r.counts.tn == kTn;
  const bool ratios = r.paper_auc == hand_auc && r.specificity == hand_spec;
  std::ostringstream os;
  os << std::setprecision(8) << "AP50 " << r.ap50 << " (ref " << ref50 << "), AP75 " << r.ap75 << " (ref " << ref75
     << "), AP50:95 " << r.ap50_95 << " (ref " << ref5095 << "); TP/FP/FN/TN " << r.counts.tp << "/" << r.counts.fp
     << "/" << r.counts.fn << "/" << r.counts.tn << "; paper_auc " << r.paper_auc.value_or(-1) << " = 30/40, specificity "
     << r.specificity.value_or(-1) << " = 18/23";
  return {aps && counts && ratios, os.str()};
}

// ---- 5 -----------------------------------------------------------------------

std::vector<std::string> metric_lines(const TrainResult& r) {
  std::vector<std::string> out;
  for (const auto& p : r.phases)
    for (const auto& e : p.epochs) out.push_back(e.metrics_json().dump());
  return out;
}

Outcome paradigm_equivalence() {
  auto rc = toy_config();
  const auto data = resize_dataset(synthesize_toy_dataset(rc.synth.n_train, rc.synth.image_size, rc.synth.n_categories, 0),
                                   rc.train.image_size, rc.train.mask_patch);
  auto zeroed = rc.train;
  zeroed.epochs = 10;
  zeroed.lr_drop_epochs = {8};
  zeroed.paradigm = Paradigm::ssad;
  zeroed.weights.recon = 0.0;
  zeroed.weights.tc = 0.0;
  auto det_only = zeroed;
  det_only.paradigm = Paradigm::detection_only;

  const auto a = train(data, zeroed), b = train(data, det_only);
  const auto la = metric_lines(a), lb = metric_lines(b);
  bool params_equal = true;
  const auto pa = a.model.detector->head_parameters(), pb = b.model.detector->head_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) params_equal = params_equal && pa[i]->value == pb[i]->value;
  const auto ea = a.model.encoder->parameters(), eb = b.model.encoder->parameters();
  for (std::size_t i = 0; i < ea.size(); ++i) params_equal = params_equal && ea[i]->value == eb[i]->value;
  const bool traces = la == lb && la.size() == 10;
  return {traces && params_equal, std::to_string(la.size()) + " epochs on " + std::to_string(data.images.size()) +
                                      " images; loss traces " + (la == lb ? "bit-identical" : "differ") +
                                      ", final encoder and head weights " + (params_equal ? "identical" : "differ")};
}

// ---- 6 -----------------------------------------------------------------------

Outcome inference_stripping() {
  const auto dir = g_work / "c6";
  fs::remove_all(dir);
  auto c = fixtures::tiny_config(3);
  TrainOptions o;
  o.out_dir = dir;
  train(fixtures::tiny_dataset(16, 64, 6), c, o);
  strip_for_inference(dir / "checkpoint.ssad", dir / "stripped.ssad");

  const auto full = load_checkpoint(dir / "checkpoint.ssad");
  const auto stripped = load_detector(dir / "stripped.ssad");
  const auto archive = nn::Archive::load(dir / "stripped.ssad");
  bool only_inference = true;
  for (const auto& [name, t] : archive.tensors)
    only_inference = only_inference && (name.starts_with("encoder.") || name.starts_with("detector."));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto synthetic = synthesize_toy_dataset(50, 64, 3, 99);
  int identical = 0;
  std::size_t detections = 0;
  for (int i = 0; i < 100; ++i) {
    ImageBuffer img = i < 50 ? synthetic.images[i] : ImageBuffer(1, 64, 64);
    if (i >= 50)
      for (double& v : img.mutable_tensor().values()) v = u(rng);
    const auto a = full.model.detector->detect(img, 0.01, 0.5);
    const auto b = stripped->detect(img, 0.01, 0.5);
    detections += a.size();
    if (a == b) ++identical;
  }
  return {identical == 100 && only_inference && detections > 0,
          "identical on " + std::to_string(identical) + "/100 images (" + std::to_string(detections) +
              " detections compared); stripped archive holds " + std::to_string(archive.tensors.size()) +
              " encoder/head tensors" + (only_inference ? "" : " plus training-only tensors")};
}

// ---- 7 -----------------------------------------------------------------------

Outcome ssad_benefit() {
  auto rc = toy_config();
  rc.compare.paradigms = {"ssad", "detection_only"};
  rc.compare.tc_ablation = false;
  rc.compare.seeds = {0, 1, 2, 3, 4};
  const auto cfg = write_config(rc, "c7.ini");
  const auto out = g_work / "c7";
  require_cli({"compare-paradigms", "--config", cfg.string(), "--data", toy_data().string(), "--out", out.string(),
               "--force"});

  const auto j = fixtures::read_json(out / "comparison.json");
  std::map<int, std::map<std::string, double>> ap50;
  for (const auto& row : j["per_seed"]) ap50[row["seed"].get<int>()][row["variant"]] = row["report"]["AP50"];
  std::cout << "  seed  ssad_AP50  detection_only_AP50  margin\n";
  double mean_ssad = 0, mean_det = 0;
  for (const auto& [seed, v] : ap50) {
    std::cout << "  " << std::setw(4) << seed << "  " << std::setw(9) << fmt(v.at("ssad")) << "  " << std::setw(19)
              << fmt(v.at("detection_only")) << "  " << std::showpos << fmt(100 * (v.at("ssad") - v.at("detection_only")), 2)
              << std::noshowpos << '\n';
    mean_ssad += v.at("ssad") / ap50.size();
    mean_det += v.at("detection_only") / ap50.size();
  }
  const double margin = 100.0 * (mean_ssad - mean_det);
  const bool harness = ap50.size() == 5 && fs::exists(out / "per_seed.csv") && fs::exists(out / "comparison.txt");
  return {harness && margin >= 2.0, "mean AP50 ssad " + fmt(100 * mean_ssad, 2) + " vs detection_only " +
                                        fmt(100 * mean_det, 2) + " over 5 seeds, margin " + fmt(margin, 2) +
                                        " points (target >= 2); per-seed table in " + (out / "per_seed.csv").string()};
}

// ---- 8 -----------------------------------------------------------------------

Outcome tc_ablation() {
  auto rc = toy_config();
  rc.train.epochs = 5;
  rc.train.lr_drop_epochs = {4};
  rc.compare.paradigms = {"ssad"};
  rc.compare.tc_ablation = true;
  rc.compare.seeds = {0};
  const auto cfg = write_config(rc, "c8.ini");
  const auto out = g_work / "c8";
  require_cli({"compare-paradigms", "--config", cfg.string(), "--data", toy_data().string(), "--out", out.string(),
               "--force"});
  const auto j = fixtures::read_json(out / "tc_ablation.json");
  const schema::Validator v(fixtures::read_json(fixtures::source_dir() / "schemas/comparison.schema.json"));
  const auto errors = v.validate(j);
  bool rows_ok = j["rows"].size() == 2;
  std::string table;
  if (rows_ok) {
    rows_ok = j["rows"][0]["tc_loss"] == "yes" && j["rows"][1]["tc_loss"] == "no";
    for (const auto& row : j["rows"]) {
      rows_ok = rows_ok && row["report"]["AP50"].is_number() && row["report"]["AP50_95"].is_number();
      table += row["variant"].get<std::string>() + " AP50 " + fmt(row["report"]["AP50"].get<double>()) + "; ";
    }
  }
  const bool files = fs::exists(out / "tc_ablation.csv") && fs::exists(out / "tc_ablation.txt");
  return {errors.empty() && rows_ok && files,
          table + (errors.empty() ? "schema-valid" : "schema errors: " + errors.front())};
}

// ---- 9 -----------------------------------------------------------------------

struct TimingCheck {
  double total = 0.0;
  bool consistent = true;
  std::string problem;
};

TimingCheck check_timing(const fs::path& run, const std::vector<std::pair<std::string, int>>& phases) {
  TimingCheck c;
  auto fail = [&](const std::string& why) {
    c.consistent = false;
    if (c.problem.empty()) c.problem = run.filename().string() + ": " + why;
  };
  const auto summary = fixtures::read_json(run / "timing_summary.json");
  c.total = summary["total_seconds"];
  std::map<std::string, double> epoch_sum, logged_phase;
  std::map<std::string, int> epoch_count;
  double logged_total = -1;
  std::istringstream lines(fixtures::read_file(run / "timing.jsonl"));
  for (std::string line; std::getline(lines, line);) {
    const auto e = nlohmann::json::parse(line);
    if (e.contains("epoch")) {
      epoch_sum[e["phase"]] += e["seconds"].get<double>();
      ++epoch_count[e["phase"]];
    } else if (e["phase"] == "total") {
      logged_total = e["seconds"];
    } else {
      logged_phase[e["phase"]] = e["seconds"];
    }
  }
  double phase_sum = 0;
  if (summary["phases"].size() != phases.size()) fail("unexpected phase count");
  for (std::size_t i = 0; i < std::min(phases.size(), summary["phases"].size()); ++i) {
    const auto& p = summary["phases"][i];
    const std::string name = p["phase"];
    const double secs = p["seconds"], epochs_s = p["epoch_seconds"], overhead = p["overhead_seconds"];
    if (name != phases[i].first || p["epochs"] != phases[i].second) fail("phase " + name + " has the wrong epoch budget");
    if (epoch_count[name] != phases[i].second) fail("timing.jsonl lists the wrong number of " + name + " epochs");
    if (std::fabs(secs - (epochs_s + overhead)) > 1e-9) fail(name + " seconds != epochs + overhead");
    if (std::fabs(epochs_s - epoch_sum[name]) > 1e-9 * std::max(1.0, epochs_s)) fail(name + " epoch seconds != sum of epoch lines");
    if (std::fabs(logged_phase[name] - secs) > 1e-9) fail(name + " phase line disagrees with the summary");
    if (overhead < 0) fail(name + " has negative overhead");
    phase_sum += secs;
  }
  if (std::fabs(phase_sum - c.total) > 1e-9) fail("total != sum of phases");
  if (std::fabs(logged_total - c.total) > 1e-9) fail("total line disagrees with the summary");
  // Wall-clock fields stay out of the deterministic metrics log.
  if (fixtures::read_file(run / "metrics.jsonl").find("seconds") != std::string::npos) fail("metrics.jsonl has timing");
  return c;
}

Outcome wall_clock() {
  constexpr int epochs = 3, repeats = 3;
  auto rc = toy_config();
  rc.train.epochs = epochs;
  rc.train.lr_drop_epochs = {};
  const auto cfg = write_config(rc, "c9.ini");
  const auto data = toy_data();
  double ssad_total = 0, ssl_total = 0;
  bool consistent = true;
  std::string problem;
  std::ostringstream runs;
  // Untimed warm-up so neither paradigm pays for cold caches.
  require_cli({"train", "--config", cfg.string(), "--data", data.string(), "--out", (g_work / "c9" / "warmup").string(),
               "--force", "--no-eval"});
  for (int r = 0; r < repeats; ++r) {
    const std::vector<std::string> order =
        r % 2 == 0 ? std::vector<std::string>{"ssad", "ssl_then_ft"} : std::vector<std::string>{"ssl_then_ft", "ssad"};
    for (const auto& paradigm : order) {
      const auto out = g_work / "c9" / (paradigm + "_" + std::to_string(r));
      require_cli({"train", "--config", cfg.string(), "--data", data.string(), "--paradigm", paradigm, "--out",
                   out.string(), "--force", "--no-eval"});
      const auto c = paradigm == "ssad" ? check_timing(out, {{"train", epochs}})
                                        : check_timing(out, {{"ssl", epochs}, {"ft", epochs}});
      consistent = consistent && c.consistent;
      if (problem.empty()) problem = c.problem;
      (paradigm == "ssad" ? ssad_total : ssl_total) += c.total;
      runs << paradigm << " " << fmt(c.total, 2) << "s ";
    }
  }

  // For reference only: the schedule where pretraining gets twice the epochs.
  auto longer = rc;
  longer.train.ssl_epochs = 2 * epochs;
  const auto cfg2 = write_config(longer, "c9_ssl2x.ini");
  const auto out2 = g_work / "c9" / "ssl_then_ft_2x";
  require_cli({"train", "--config", cfg2.string(), "--data", data.string(), "--paradigm", "ssl_then_ft", "--out",
               out2.string(), "--force", "--no-eval"});
  const auto c2 = check_timing(out2, {{"ssl", 2 * epochs}, {"ft", epochs}});
  consistent = consistent && c2.consistent;
  if (problem.empty()) problem = c2.problem;

  const bool direction = ssl_total > ssad_total;
  std::ostringstream os;
  os << "accounting " << (consistent ? "consistent" : "INCONSISTENT (" + problem + ")") << "; " << epochs
     << "-epoch budgets x" << repeats << ": ssl_then_ft " << fmt(ssl_total, 2) << "s vs ssad " << fmt(ssad_total, 2)
     << "s, ratio " << fmt(ssl_total / ssad_total, 3) << " (" << runs.str() << "); with 2x pretraining epochs ssl_then_ft " << fmt(c2.total, 2) << "s per run vs ssad "
     << fmt(ssad_total / repeats, 2) << "s";
  return {consistent && direction, os.str()};
}

// ---- 10 ----------------------------------------------------------------------

// Files whose content is wall-clock time or a timestamp.
bool nondeterministic_by_design(const fs::path& p) {
  const auto name = p.filename().string();
  return name.starts_with("timing") || name == ".ssad.lock";
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || nondeterministic_by_design(e.path())) continue;
    std::string content = fixtures::read_file(e.path());
    if (e.path().filename() == "manifest.json") {
      auto j = nlohmann::json::parse(content);
      for (const char* k : {"started_at", "finished_at", "output_dir", "argv"}) j.erase(k);
      content = j.dump();
    }
    out[fs::relative(e.path(), root).string()] = std::move(content);
  }
  return out;
}

Outcome determinism() {
  auto rc = load_run_config(fixtures::source_dir() / "tests/data/tiny.ini");
  rc.compare.seeds = {3};
  rc.compare.paradigms = {"ssad", "detection_only", "ssl_then_ft"};
  rc.compare.tc_ablation = true;
  rc.compare.extractors = {"toy_conv", "gabor_bank", "sam_vit_b"};
  const auto cfg = write_config(rc, "c10.ini");
  const auto root = g_work / "c10";
  fs::remove_all(root);

  std::vector<std::pair<std::string, std::function<std::vector<std::string>(const fs::path&)>>> commands{
      {"synth", [&](const fs::path& o) { return std::vector<std::string>{"synth", "--config", cfg.string(), "--seed", "3", "--out", o.string()}; }},
      {"train", [&](const fs::path& o) { return std::vector<std::string>{"train", "--config", cfg.string(), "--seed", "3", "--data", (root / "data").string(), "--out", o.string()}; }},
      {"train_ssl_then_ft", [&](const fs::path& o) { return std::vector<std::string>{"train", "--config", cfg.string(), "--seed", "3", "--paradigm", "ssl_then_ft", "--data", (root / "data").string(), "--out", o.string()}; }},
      {"eval", [&](const fs::path& o) { return std::vector<std::string>{"eval", "--config", cfg.string(), "--checkpoint", (root / "train_ref").string(), "--data", (root / "data").string(), "--out", o.string(), "--pr-curves"}; }},
      {"compare-paradigms", [&](const fs::path& o) { return std::vector<std::string>{"compare-paradigms", "--config", cfg.string(), "--data", (root / "data").string(), "--out", o.string()}; }},
      {"bench-extractors", [&](const fs::path& o) { return std::vector<std::string>{"bench-extractors", "--config", cfg.string(), "--seed", "3", "--data", (root / "data").string(), "--out", o.string()}; }},
      {"reconstruct-preview", [&](const fs::path& o) { return std::vector<std::string>{"reconstruct-preview", "--config", cfg.string(), "--seed", "3", "--checkpoint", (root / "train_ref").string(), "--data", (root / "data").string(), "--out", o.string()}; }},
      {"overlay", [&](const fs::path& o) { return std::vector<std::string>{"overlay", "--config", cfg.string(), "--checkpoint", (root / "train_ref").string(), "--annotations", (root / "data/test.json").string(), "--out", o.string(), (root / "data/images/000009.png").string(), (root / "data/images/000010.png").string()}; }},
  };

  std::ostringstream os;
  bool ok = true;
  std::size_t files = 0;
  for (const auto& [name, make] : commands) {
    const auto ref = root / (name + "_ref"), again = root / (name + "_again");
    require_cli(make(ref));
    require_cli(make(again));
    if (name == "synth") fs::copy(ref, root / "data", fs::copy_options::recursive);
    const auto a = snapshot(ref), b = snapshot(again);
    files += a.size();
    if (a != b || a.empty()) {
      ok = false;
      for (const auto& [path, content] : a)
        if (!b.count(path) || b.at(path) != content) {
          os << name << " differs at " << path << "; ";
          break;
        }
    }
  }
  os << commands.size() << " commands run twice, " << files
     << " output files byte-identical (timing logs and manifest timestamps excluded)";
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_work = fs::current_path() / "acceptance_work";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else if (a == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      std::cerr << "usage: ssad_acceptance [--only 1,2,...] [--work DIR]\n";
      return 2;
    }
  }
  fs::create_directories(g_work);

  const std::vector<Criterion> criteria{
      {1, "loss formulas match brute-force oracles", loss_oracles},
      {2, "gradients match finite differences", gradient_checks},
      {3, "masking count and bit preservation", masking_exactness},
      {4, "metric suite matches the reference evaluator", metric_oracle},
      {5, "zeroed auxiliary weights reproduce detection_only", paradigm_equivalence},
      {6, "stripped detector matches the full checkpoint", inference_stripping},
      {7, "ssad beats detection_only on the toy corpus", ssad_benefit},
      {8, "TC ablation table", tc_ablation},
      {9, "wall-clock bookkeeping", wall_clock},
      {10, "reruns are byte-identical", determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::cout << "-- criterion " << c.id << ": " << c.title << std::endl;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << ", " << fmt(secs, 1)
              << " s): " << o.detail << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

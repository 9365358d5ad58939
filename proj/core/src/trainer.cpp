#include "ssad/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ssad/ops.hpp"

namespace ssad {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) { return splitmix(seed ^ splitmix(stream)); }

// Independent streams so that turning a branch off never shifts another
// branch's random draws.
enum Stream : std::uint64_t { kEncoder = 1, kDecoder = 2, kHeads = 3, kShuffle = 4, kAugment = 5 };

std::string engine_state(const std::mt19937_64& e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

void set_engine_state(std::mt19937_64& e, const std::string& s) {
  std::istringstream is(s);
  is >> e;
  if (!is) throw Error("corrupt RNG state in checkpoint");
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

void add_into(std::optional<double>& acc, const std::optional<double>& v, double scale) {
  if (v) acc = acc.value_or(0.0) + scale * *v;
}

void accumulate(LossBundle& acc, const LossBundle& b, double scale) {
  add_into(acc.recon, b.recon, scale);
  add_into(acc.tc_align, b.tc_align, scale);
  add_into(acc.tc_gather, b.tc_gather, scale);
  add_into(acc.det_cls, b.det_cls, scale);
  add_into(acc.det_reg, b.det_reg, scale);
  acc.total += scale * b.total;
}

LossBundle merge(const LossBundle& a, const LossBundle& b) {
  LossBundle out = a;
  if (b.recon) out.recon = b.recon;
  if (b.tc_align) out.tc_align = b.tc_align;
  if (b.tc_gather) out.tc_gather = b.tc_gather;
  if (b.det_cls) out.det_cls = b.det_cls;
  if (b.det_reg) out.det_reg = b.det_reg;
  out.total = a.total + b.total;
  return out;
}

void append_line(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

void truncate_file(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

ParameterList all_parameters(const SsadModel& m) {
  ParameterList out = m.encoder->parameters();
  if (m.reconstruction) {
    for (const auto& p : m.reconstruction->decoder_parameters()) out.push_back(p);
  }
  if (m.detector) {
    for (const auto& p : m.detector->head_parameters()) out.push_back(p);
  }
  return out;
}

double LossBundle::weighted_total(const LossBundle& b, const LossWeights& w) {
  double t = 0.0;
  if (b.recon) t += w.recon * *b.recon;
  if (b.tc_align) t += w.tc * *b.tc_align;
  if (b.tc_gather) t += w.tc * *b.tc_gather;
  if (b.det_cls) t += w.cls * *b.det_cls;
  if (b.det_reg) t += w.reg * *b.det_reg;
  return t;
}

nlohmann::json LossBundle::to_json() const {
  return {{"recon", optional_json(recon)},       {"tc_align", optional_json(tc_align)},
          {"tc_gather", optional_json(tc_gather)}, {"det_cls", optional_json(det_cls)},
          {"det_reg", optional_json(det_reg)},     {"total", total}};
}

SsadModel build_model(const TrainConfig& config, int n_categories, int in_channels) {
  SsadModel m;
  m.in_channels = in_channels;
  EncoderConfig ec;
  ec.in_channels = in_channels;
  ec.out_channels = config.encoder_out;
  ec.widths = config.encoder_widths;
  ec.seed = derive(config.seed, kEncoder);
  m.encoder = reference_encoder(ec);

  if (config.paradigm != Paradigm::detection_only) {
    DecoderConfig dc;
    dc.hidden1 = config.decoder_hidden1;
    dc.hidden2 = config.decoder_hidden2;
    dc.fill = config.mask_fill;
    dc.seed = derive(config.seed, kDecoder);
    m.reconstruction = std::make_shared<ReconstructionBranch>(m.encoder, dc);
    if (config.weights.tc != 0.0) {
      ExtractorOptions eo;
      eo.in_channels = in_channels;
      m.extractor = make_extractor(config.extractor, eo);
    }
  }

  DetectorConfig hc;
  hc.n_categories = n_categories;
  hc.hidden = config.detector_hidden;
  hc.seed = derive(config.seed, kHeads);
  m.detector = std::make_shared<CenterCellDetector>(m.encoder, hc);
  return m;
}

std::uint64_t mask_seed(std::uint64_t run_seed, int epoch, std::int64_t image_id) {
  return derive(derive(run_seed, 0x6d61736bULL + static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(image_id));
}

Trainer::Trainer(SsadModel model, TrainConfig config)
    : model_(std::move(model)),
      config_(std::move(config)),
      shuffle_rng_(derive(config_.seed, kShuffle)),
      augment_rng_(derive(config_.seed, kAugment)) {
  config_.validate();
  if (!model_.encoder || !model_.detector) throw Error("trainer needs an encoder and a detector");
  if (model_.detector->encoder() != model_.encoder) throw Error("detector must share the model's encoder");
  if (config_.weights.reconstruction_active()) {
    if (!model_.reconstruction) throw Error("reconstruction loss weights are nonzero but the model has no decoder");
    if (model_.reconstruction->encoder() != model_.encoder) throw Error("decoder must share the model's encoder");
  }
  if (config_.weights.tc != 0.0 && !model_.extractor) throw Error("texture loss weight is nonzero but no extractor");

  encoder_opt_ = std::make_unique<AdamW>(model_.encoder->parameters(),
                                         AdamW::Options{0.9, 0.999, 1e-8, config_.weight_decay});
  head_opt_ = std::make_unique<AdamW>(model_.detector->head_parameters(),
                                      AdamW::Options{0.9, 0.999, 1e-8, config_.weight_decay});
  if (model_.reconstruction) {
    decoder_opt_ = std::make_unique<Sgd>(model_.reconstruction->decoder_parameters(),
                                         Sgd::Options{config_.momentum, 0.0});
  }
}

double Trainer::lr_det(int epoch) const {
  return scheduled_lr(config_.lr_det, config_.lr_drop_epochs, config_.lr_drop_factor, epoch);
}

double Trainer::lr_recon(int epoch) const {
  return scheduled_lr(config_.lr_recon, config_.lr_drop_epochs, config_.lr_drop_factor, epoch);
}

void Trainer::check_finite(const LossBundle& b, const TrainSample& s, int epoch) const {
  const std::pair<const char*, std::optional<double>> parts[] = {
      {"recon", b.recon}, {"tc_align", b.tc_align}, {"tc_gather", b.tc_gather},
      {"det_cls", b.det_cls}, {"det_reg", b.det_reg}, {"total", b.total}};
  for (const auto& [name, v] : parts) {
    if (v && !std::isfinite(*v)) {
      throw TrainingDiverged("non-finite " + std::string(name) + " loss at epoch " + std::to_string(epoch) +
                             " on image " + std::to_string(s.record->image_id));
    }
  }
}

RecordedLoss record_losses(Tape& tape, const SsadModel& model, const TrainConfig& config, const TrainSample& s,
                           int epoch, bool detection, bool reconstruction) {
  const auto& w = config.weights;
  const ImageBuffer& img = *s.image;
  RecordedLoss out;
  LossBundle& b = out.components;
  std::vector<std::pair<double, Var>> terms;

  if (detection) {
    Var features = model.encoder->forward(tape, tape.constant(img.tensor()));
    const auto det = model.detector->loss(tape, features, *s.record);
    b.det_cls = tape.value(det.cls).item();
    b.det_reg = tape.value(det.reg).item();
    if (w.cls != 0.0) terms.emplace_back(w.cls, det.cls);
    if (w.reg != 0.0) terms.emplace_back(w.reg, det.reg);
  }

  if (reconstruction) {
    if (!model.reconstruction) throw Error("model has no reconstruction branch");
    const int rows = img.height() / config.mask_patch, cols = img.width() / config.mask_patch;
    const auto mask = generate_mask(rows, cols, config.mask_rate, mask_seed(config.seed, epoch, s.record->image_id),
                                    config.mask_patch);
    const auto& branch = *model.reconstruction;
    Var rec = branch.decode(tape, model.encoder->forward(tape, branch.masked_image(tape, img, mask)));
    if (w.recon != 0.0) {
      Var l = recon_loss(tape, rec, img, mask);
      b.recon = tape.value(l).item();
      terms.emplace_back(w.recon, l);
    }
    if (w.tc != 0.0) {
      if (!model.extractor) throw Error("model has no texture extractor");
      const TcOptions opts{config.tc_gather_on_normalized};
      Var v_d = model.extractor->embed(tape, tape.constant(img.tensor()));
      Var v_r = model.extractor->embed(tape, rec);
      Var align = alignment_loss(tape, v_d, v_r);
      Var gather = gather_loss(tape, v_d, v_r, opts);
      b.tc_align = tape.value(align).item();
      b.tc_gather = tape.value(gather).item();
      terms.emplace_back(w.tc, align);
      terms.emplace_back(w.tc, gather);
    }
  }

  b.total = LossBundle::weighted_total(b, w);
  if (!terms.empty()) out.total = ops::weighted_sum(tape, terms);
  return out;
}

LossBundle Trainer::image_pass(const TrainSample& s, int epoch, bool detection, bool reconstruction, double scale) {
  // One tape per branch: parameter gradients accumulate to the same sum as a
  // joint backward, but only one branch's activations are alive at a time.
  LossBundle out;
  for (const bool detection_side : {true, false}) {
    const bool d = detection_side && detection, r = !detection_side && reconstruction;
    if (!d && !r) continue;
    Tape tape;
    const auto rec = record_losses(tape, model_, config_, s, epoch, d, r);
    check_finite(rec.components, s, epoch);
    if (rec.total.valid()) tape.backward(rec.total, scale);
    out = merge(out, rec.components);
  }
  out.total = LossBundle::weighted_total(out, config_.weights);
  return out;
}

LossBundle Trainer::train_step(std::span<const TrainSample> batch, int epoch) {
  if (batch.empty()) throw Error("train_step needs a nonempty batch");
  const bool det = config_.weights.detection_active();
  const bool rec = config_.weights.reconstruction_active();
  const double scale = 1.0 / static_cast<double>(batch.size());
  const double lr_d = lr_det(epoch), lr_r = lr_recon(epoch);

  auto pass = [&](bool d, bool r) {
    encoder_opt_->zero_grad();
    head_opt_->zero_grad();
    if (decoder_opt_) decoder_opt_->zero_grad();
    LossBundle mean;
    for (const auto& s : batch) accumulate(mean, image_pass(s, epoch, d, r, scale), scale);
    encoder_opt_->step(lr_d);
    if (d) head_opt_->step(lr_d);
    if (r) decoder_opt_->step(lr_r);
    return mean;
  };

  if (config_.alternating_updates && det && rec) return merge(pass(true, false), pass(false, true));
  return pass(det, rec);
}

std::vector<std::vector<TrainSample>> Trainer::epoch_batches(const ImageDataset& data) {
  std::vector<std::size_t> order(data.images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), shuffle_rng_);
  std::vector<std::vector<TrainSample>> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(config_.batch_size)) {
    std::vector<TrainSample> b;
    for (std::size_t k = i; k < std::min(order.size(), i + config_.batch_size); ++k) {
      b.push_back({&data.images[order[k]], &data.annotations.records[order[k]]});
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

void Trainer::save_checkpoint(const std::filesystem::path& path, int epoch, const std::string& phase) const {
  nn::Archive a;
  a.metadata["archive"] = "checkpoint";
  a.metadata["config"] = config_.to_json();
  a.metadata["phase"] = phase;
  a.metadata["epoch"] = epoch;
  a.metadata["in_channels"] = model_.in_channels;
  a.metadata["category_names"] = model_.category_names;
  a.metadata["n_categories"] = model_.detector->num_categories();
  a.metadata["encoder"] = describe_encoder(*model_.encoder);
  a.metadata["detector"] = model_.detector->describe();
  a.metadata["has_decoder"] = static_cast<bool>(model_.reconstruction);
  a.metadata["extractor"] = model_.extractor ? nlohmann::json(model_.extractor->name()) : nlohmann::json(nullptr);
  a.metadata["rng"] = {{"shuffle", engine_state(shuffle_rng_)}, {"augment", engine_state(augment_rng_)}};
  a.put(all_parameters(model_));
  encoder_opt_->save_state(a, "optim.encoder");
  head_opt_->save_state(a, "optim.heads");
  if (decoder_opt_) decoder_opt_->save_state(a, "optim.decoder");
  a.save(path);
}

int Trainer::load_checkpoint(const std::filesystem::path& path) {
  const auto a = nn::Archive::load(path);
  if (a.metadata.value("archive", "") != "checkpoint") throw Error(path.string() + " is not a training checkpoint");
  if (TrainConfig::from_json(a.metadata.at("config")).paradigm != config_.paradigm) {
    throw Error("checkpoint paradigm differs from the trainer's");
  }
  a.restore(all_parameters(model_));
  encoder_opt_->load_state(a, "optim.encoder");
  head_opt_->load_state(a, "optim.heads");
  if (decoder_opt_) decoder_opt_->load_state(a, "optim.decoder");
  set_engine_state(shuffle_rng_, a.metadata.at("rng").at("shuffle").get<std::string>());
  set_engine_state(augment_rng_, a.metadata.at("rng").at("augment").get<std::string>());
  return a.metadata.at("epoch").get<int>();
}

nlohmann::json EpochLog::metrics_json() const {
  nlohmann::json j = {{"phase", phase}, {"epoch", epoch}, {"lr_det", lr_det}, {"lr_recon", lr_recon},
                      {"images", images}, {"steps", steps}};
  const auto losses = mean.to_json();
  for (const auto& [k, v] : losses.items()) j[k] = v;
  return j;
}

nlohmann::json EpochLog::timing_json() const { return {{"phase", phase}, {"epoch", epoch}, {"seconds", seconds}}; }

double PhaseReport::epoch_seconds() const {
  double s = 0.0;
  for (const auto& e : epochs) s += e.seconds;
  return s;
}

double TrainResult::total_seconds() const {
  double s = 0.0;
  for (const auto& p : phases) s += p.seconds();
  return s;
}

nlohmann::json TrainResult::timing_summary() const {
  nlohmann::json j;
  j["phases"] = nlohmann::json::array();
  for (const auto& p : phases) {
    j["phases"].push_back({{"phase", p.name},
                           {"epochs", p.epochs.size()},
                           {"epoch_seconds", p.epoch_seconds()},
                           {"overhead_seconds", p.overhead_seconds},
                           {"seconds", p.seconds()}});
  }
  j["total_seconds"] = total_seconds();
  return j;
}

ImageDataset resize_dataset(const ImageDataset& data, int image_size, int patch_size) {
  ImageDataset out;
  out.annotations = data.annotations;
  out.annotations.records.clear();
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    auto [img, rec] = resize_with_boxes(data.images[i], data.annotations.records[i], image_size, patch_size);
    out.images.push_back(std::move(img));
    out.annotations.records.push_back(std::move(rec));
  }
  return out;
}

namespace {

struct PhaseSpec {
  std::string name;
  TrainConfig config;
  int epochs = 0;
  std::optional<std::filesystem::path> dir;
};

/// Applies the per-epoch flip to a working copy of the dataset.
const ImageDataset& augmented(const ImageDataset& base, ImageDataset& scratch, std::mt19937_64& rng, bool enabled) {
  if (!enabled) return base;
  scratch = base;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < base.images.size(); ++i) {
    if (coin(rng)) {
      auto [img, rec] = horizontal_flip(base.images[i], base.annotations.records[i]);
      scratch.images[i] = std::move(img);
      scratch.annotations.records[i] = std::move(rec);
    }
  }
  return scratch;
}

PhaseReport run_phase(Trainer& trainer, const ImageDataset& data, const PhaseSpec& spec, int start_epoch,
                      const TrainOptions& options, std::mt19937_64& augment_rng, Clock::time_point phase_start) {
  PhaseReport report;
  report.name = spec.name;
  if (spec.dir) {
    std::filesystem::create_directories(*spec.dir);
    if (start_epoch == 0) {
      truncate_file(*spec.dir / "metrics.jsonl");
      truncate_file(*spec.dir / "timing.jsonl");
    }
  }
  ImageDataset scratch;
  for (int epoch = start_epoch + 1; epoch <= spec.epochs; ++epoch) {
    const auto t0 = Clock::now();
    const ImageDataset& d = augmented(data, scratch, augment_rng, spec.config.horizontal_flip);
    EpochLog log;
    log.phase = spec.name;
    log.epoch = epoch;
    log.lr_det = trainer.lr_det(epoch);
    log.lr_recon = trainer.lr_recon(epoch);
    for (const auto& batch : trainer.epoch_batches(d)) {
      const auto b = trainer.train_step(batch, epoch);
      accumulate(log.mean, b, static_cast<double>(batch.size()));
      log.images += static_cast<int>(batch.size());
      ++log.steps;
    }
    LossBundle mean;
    accumulate(mean, log.mean, 1.0 / log.images);
    log.mean = mean;
    log.seconds = seconds_since(t0);
    report.epochs.push_back(log);
    if (spec.dir) {
      append_line(*spec.dir / "metrics.jsonl", log.metrics_json());
      append_line(*spec.dir / "timing.jsonl", log.timing_json());
    }
    if (options.on_epoch) options.on_epoch(log);
  }
  if (spec.dir) trainer.save_checkpoint(*spec.dir / "checkpoint.ssad", spec.epochs, spec.name);
  report.overhead_seconds = std::max(0.0, seconds_since(phase_start) - report.epoch_seconds());
  return report;
}

int capped(int epochs, const TrainOptions& o) { return o.max_epochs > 0 ? std::min(epochs, o.max_epochs) : epochs; }

}  // namespace

TrainResult train(const ImageDataset& train_set, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (train_set.images.empty()) throw Error("training set is empty");
  if (train_set.images.size() != train_set.annotations.records.size()) throw Error("image and annotation counts differ");
  for (const auto& img : train_set.images) {
    if (img.height() != config.image_size || img.width() != config.image_size) {
      throw Error("training images must be " + std::to_string(config.image_size) + "px; resize the dataset first");
    }
  }
  const int n_categories = train_set.annotations.num_categories();
  const int in_channels = train_set.images.front().channels();
  auto build = options.model_factory ? options.model_factory : build_model;
  auto factory = [&](const TrainConfig& c, int n, int ch) {
    SsadModel m = build(c, n, ch);
    m.category_names = train_set.annotations.category_names;
    return m;
  };
  std::mt19937_64 augment_rng(derive(config.seed, kAugment));

  TrainResult result;
  if (config.paradigm != Paradigm::ssl_then_ft) {
    const auto t0 = Clock::now();
    TrainConfig c = config;
    if (c.paradigm == Paradigm::detection_only) c.weights.recon = c.weights.tc = 0.0;
    PhaseSpec spec{"train", c, capped(c.epochs, options), options.out_dir};
    Trainer trainer(factory(c, n_categories, in_channels), c);
    int start = 0;
    if (options.resume_from) start = trainer.load_checkpoint(*options.resume_from);
    result.phases.push_back(run_phase(trainer, train_set, spec, start, options, augment_rng, t0));
    result.model = trainer.model();
  } else {
    if (options.resume_from) throw Error("resuming is supported for single-phase paradigms only");
    const auto t1 = Clock::now();
    TrainConfig c1 = config;
    c1.weights.cls = c1.weights.reg = 0.0;
    c1.epochs = config.phase1_epochs();
    c1.lr_drop_epochs.clear();
    for (int d : config.lr_drop_epochs)
      if (d <= c1.epochs) c1.lr_drop_epochs.push_back(d);
    if (!c1.weights.reconstruction_active()) throw Error("ssl_then_ft needs a nonzero recon or tc weight");
    std::optional<std::filesystem::path> d1, d2;
    if (options.out_dir) {
      d1 = *options.out_dir / "phase1_ssl";
      d2 = *options.out_dir / "phase2_ft";
    }
    Trainer ssl(factory(c1, n_categories, in_channels), c1);
    result.phases.push_back(
        run_phase(ssl, train_set, {"ssl", c1, capped(c1.epochs, options), d1}, 0, options, augment_rng, t1));

    const auto t2 = Clock::now();
    TrainConfig c2 = config;
    c2.weights.recon = c2.weights.tc = 0.0;
    if (!c2.weights.detection_active()) throw Error("ssl_then_ft needs a nonzero cls or reg weight");
    SsadModel ft = factory(c2, n_categories, in_channels);
    nn::Archive encoder_state;
    encoder_state.put(ssl.model().encoder->parameters());
    encoder_state.restore(ft.encoder->parameters());
    Trainer finetune(std::move(ft), c2);
    result.phases.push_back(
        run_phase(finetune, train_set, {"ft", c2, capped(c2.epochs, options), d2}, 0, options, augment_rng, t2));
    result.model = finetune.model();
  }

  if (options.out_dir) {
    const auto& dir = *options.out_dir;
    if (config.paradigm == Paradigm::ssl_then_ft) {
      truncate_file(dir / "metrics.jsonl");
      for (const auto& p : result.phases)
        for (const auto& e : p.epochs) append_line(dir / "metrics.jsonl", e.metrics_json());
      std::filesystem::copy_file(dir / "phase2_ft" / "checkpoint.ssad", dir / "checkpoint.ssad",
                                 std::filesystem::copy_options::overwrite_existing);
    }
    const auto t3 = Clock::now();
    save_detector(dir / "detector.ssad", *result.model.detector,
                  {{"paradigm", to_string(config.paradigm)},
                   {"seed", config.seed},
                   {"image_size", config.image_size},
                   {"category_names", result.model.category_names}});
    result.phases.back().overhead_seconds += seconds_since(t3);
    std::ofstream timing(dir / "timing_summary.json", std::ios::trunc);
    timing << result.timing_summary().dump(2) << '\n';
    if (config.paradigm != Paradigm::ssl_then_ft) {
      const auto& p = result.phases.back();
      append_line(dir / "timing.jsonl", {{"phase", p.name}, {"seconds", p.seconds()}});
      append_line(dir / "timing.jsonl", {{"phase", "total"}, {"seconds", result.total_seconds()}});
    } else {
      truncate_file(dir / "timing.jsonl");
      for (const auto& p : result.phases) {
        for (const auto& e : p.epochs) append_line(dir / "timing.jsonl", e.timing_json());
        append_line(dir / "timing.jsonl", {{"phase", p.name}, {"seconds", p.seconds()}});
      }
      append_line(dir / "timing.jsonl", {{"phase", "total"}, {"seconds", result.total_seconds()}});
    }
  }
  return result;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto a = nn::Archive::load(path);
  if (a.metadata.value("archive", "") != "checkpoint") throw Error(path.string() + " is not a training checkpoint");
  Checkpoint c;
  try {
    c.config = TrainConfig::from_json(a.metadata.at("config"));
    c.phase = a.metadata.at("phase").get<std::string>();
    c.epoch = a.metadata.at("epoch").get<int>();
    c.n_categories = a.metadata.at("n_categories").get<int>();
    SsadModel& m = c.model;
    m.in_channels = a.metadata.at("in_channels").get<int>();
    m.category_names = a.metadata.value("category_names", std::vector<std::string>{});
    m.encoder = encoder_from_description(a.metadata.at("encoder"));
    m.detector = detector_from_description(a.metadata.at("detector"), m.encoder);
    if (a.metadata.at("has_decoder").get<bool>()) {
      DecoderConfig dc;
      dc.hidden1 = c.config.decoder_hidden1;
      dc.hidden2 = c.config.decoder_hidden2;
      dc.fill = c.config.mask_fill;
      m.reconstruction = std::make_shared<ReconstructionBranch>(m.encoder, dc);
    }
    if (!a.metadata.at("extractor").is_null()) {
      ExtractorOptions eo;
      eo.in_channels = m.in_channels;
      m.extractor = make_extractor(a.metadata.at("extractor").get<std::string>(), eo);
    }
    a.restore(all_parameters(m));
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return c;
}

DetectorHandle strip_for_inference(const Checkpoint& checkpoint) {
  const auto& m = checkpoint.model;
  auto encoder = encoder_from_description(describe_encoder(*m.encoder));
  auto detector = detector_from_description(m.detector->describe(), encoder);
  nn::Archive a;
  a.put(m.encoder->parameters());
  a.put(m.detector->head_parameters());
  a.restore(encoder->parameters());
  a.restore(detector->head_parameters());
  return detector;
}

void strip_for_inference(const std::filesystem::path& checkpoint_path, const std::filesystem::path& detector_path) {
  const auto c = load_checkpoint(checkpoint_path);
  save_detector(detector_path, *strip_for_inference(c),
                {{"paradigm", to_string(c.config.paradigm)},
                 {"seed", c.config.seed},
                 {"image_size", c.config.image_size},
                 {"category_names", c.model.category_names}});
}

}  // namespace ssad

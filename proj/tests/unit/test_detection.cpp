#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ssad/detection.hpp"
#include "ssad/trainer.hpp"

using namespace ssad;

namespace {

ImageBuffer noise_image(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageBuffer img(1, size, size);
  for (double& v : img.mutable_tensor().values()) v = u(rng);
  return img;
}

EncoderHandle small_encoder() {
  EncoderConfig c;
  c.widths = {4, 8, 8, 16};
  c.out_channels = 16;
  return reference_encoder(c);
}

AnnotationRecord record_with(std::vector<GroundTruthBox> boxes, int size = 512) {
  AnnotationRecord r;
  r.width = r.height = size;
  r.boxes = std::move(boxes);
  return r;
}

// Minimal second adapter: 1x1 projections straight off the encoder.
class PointwiseDetector final : public DetectorAdapter {
 public:
  PointwiseDetector(EncoderHandle encoder, int n_categories) : encoder_(std::move(encoder)), n_(n_categories) {
    std::mt19937_64 rng(99);
    cls_ = std::make_unique<nn::Conv2d>("pointwise.cls", encoder_->out_channels(), n_ + 1, ops::ConvGeometry{1, 1, 0}, rng);
    reg_ = std::make_unique<nn::Conv2d>("pointwise.reg", encoder_->out_channels(), 4, ops::ConvGeometry{1, 1, 0}, rng);
    params_ = merge_parameters({cls_->parameters(), reg_->parameters()});
  }
  std::string kind() const override { return "pointwise"; }
  const EncoderHandle& encoder() const override { return encoder_; }
  int num_categories() const override { return n_; }
  const ParameterList& head_parameters() const override { return params_; }
  DetLossVars loss(Tape& tape, Var features, const AnnotationRecord& record) const override {
    const Tensor& f = tape.value(features);
    const GridGeometry grid{f.dim(1), f.dim(2), encoder_->stride()};
    const auto targets = assign_targets(record, grid, n_);
    return det_loss(tape, (*cls_)(tape, features), (*reg_)(tape, features), targets);
  }
  std::vector<Detection> detect_features(const FeatureMap& features, int w, int h, double thr,
                                         double nms) const override {
    Tape tape(false);
    Var x = tape.constant(features.values);
    HeadOutputs out{tape.value((*cls_)(tape, x)), tape.value((*reg_)(tape, x))};
    return decode_detections(out, {features.rows(), features.cols(), encoder_->stride()}, w, h, thr, nms);
  }
  nlohmann::json describe() const override { return {{"kind", kind()}}; }

 private:
  EncoderHandle encoder_;
  int n_;
  std::unique_ptr<nn::Conv2d> cls_;
  std::unique_ptr<nn::Conv2d> reg_;
  ParameterList params_;
};

}  // namespace

TEST_CASE("threshold 1.0 yields no detections") {
  CenterCellDetector det(small_encoder(), {3, 8, 2});
  CHECK(det.detect(noise_image(64, 1), 1.0, 0.5).empty());
}

TEST_CASE("NMS keeps one of two identical boxes") {
  const Detection a{{10, 10, 50, 50, 1}, 0.9}, b{{10, 10, 50, 50, 1}, 0.8};
  const auto kept = non_max_suppression({b, a}, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == a);
  // Different categories do not suppress each other.
  CHECK(non_max_suppression({a, Detection{{10, 10, 50, 50, 2}, 0.7}}, 0.5).size() == 2);
}

TEST_CASE("NMS output has pairwise IoU below the threshold per category") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<Detection> d;
    for (int i = 0; i < 30; ++i) {
      const double x = u(rng) * 100, y = u(rng) * 100;
      d.push_back({{x, y, x + 5 + u(rng) * 40, y + 5 + u(rng) * 40, static_cast<int>(u(rng) * 2)}, u(rng)});
    }
    const double thr = 0.3 + 0.4 * u(rng);
    const auto kept = non_max_suppression(d, thr);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (i > 0) CHECK(kept[i - 1].score >= kept[i].score);
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        if (kept[i].category_id() == kept[j].category_id()) CHECK(box_iou(kept[i].box, kept[j].box) < thr);
    }
  }
}

TEST_CASE("zero offsets decode to a degenerate box that is rejected") {
  HeadOutputs out{Tensor({4, 2, 2}, 0.0), Tensor({4, 2, 2}, 0.0)};
  out.cls_logits[0] = 10.0;  // class 0 dominant at cell 0
  CHECK(decode_detections(out, {2, 2, 32}, 64, 64, 0.05, 0.5).empty());
  for (int e = 0; e < 4; ++e) out.regression[e * 4 + 0] = 0.25;
  const auto d = decode_detections(out, {2, 2, 32}, 64, 64, 0.05, 0.5);
  REQUIRE(d.size() == 1);
  CHECK(d[0].box == GroundTruthBox{8, 8, 24, 24, 0});
}

TEST_CASE("a box centered in cell (4,4) gives exactly one positive cell") {
  const GridGeometry grid{16, 16, 32};
  const double c = 4.5 * 32;
  const auto t = assign_targets(record_with({{c - 20, c - 10, c + 20, c + 10, 2}}), grid, 3);
  CHECK(t.positives() == 1);
  CHECK(t.labels[4 * 16 + 4] == 2);
  CHECK(t.offsets[4 * 16 + 4] == std::array<double, 4>{20.0 / 32, 10.0 / 32, 20.0 / 32, 10.0 / 32});
}

TEST_CASE("an empty record is all background") {
  const auto t = assign_targets(record_with({}), {4, 4, 32}, 3);
  CHECK(t.positives() == 0);
  for (int l : t.labels) CHECK(l == 3);
  for (const auto& o : t.offsets) CHECK(o == std::array<double, 4>{0, 0, 0, 0});
}

TEST_CASE("colliding centers go to the smaller box") {
  const GridGeometry grid{4, 4, 32};
  const auto t = assign_targets(record_with({{30, 30, 50, 50, 0}, {35, 35, 45, 45, 1}}, 128), grid, 3);
  CHECK(t.positives() == 1);
  CHECK(t.labels[1 * 4 + 1] == 1);
  CHECK(t.box_index[1 * 4 + 1] == 1);
  // Order does not matter.
  const auto u = assign_targets(record_with({{35, 35, 45, 45, 1}, {30, 30, 50, 50, 0}}, 128), grid, 3);
  CHECK(u.labels[1 * 4 + 1] == 1);
}

TEST_CASE("boxes with distinct center cells are each assigned") {
  const auto ds = synthesize_toy_dataset(20, 128, 3, 4);
  for (const auto& r : ds.annotations.records) {
    const auto t = assign_targets(r, {4, 4, 32}, 3);
    std::set<int> assigned;
    for (int b : t.box_index)
      if (b >= 0) assigned.insert(b);
    std::set<int> cells;
    for (const auto& b : r.boxes) cells.insert(static_cast<int>(b.center_y() / 32) * 4 + static_cast<int>(b.center_x() / 32));
    CHECK(assigned.size() == cells.size());
  }
}

TEST_CASE("assign_targets rejects categories outside the head") {
  CHECK_THROWS_AS(assign_targets(record_with({{0, 0, 10, 10, 3}}), {4, 4, 32}, 3), Error);
}

TEST_CASE("uniform logits give cross-entropy ln(C+1)") {
  const GridGeometry grid{3, 3, 32};
  const auto t = assign_targets(record_with({{0, 0, 30, 30, 1}}, 96), grid, 3);
  const auto l = det_loss({Tensor({4, 3, 3}, 0.7), Tensor({4, 3, 3}, 0.0)}, t);
  CHECK(l.cls == doctest::Approx(std::log(4.0)));
}

TEST_CASE("perfect offsets give zero regression loss; saturated logits give near-zero cls") {
  const GridGeometry grid{2, 2, 32};
  const auto t = assign_targets(record_with({{5, 3, 30, 29, 0}}, 64), grid, 2);
  HeadOutputs out{Tensor({3, 2, 2}, 0.0), Tensor({4, 2, 2}, 0.0)};
  for (int cell = 0; cell < 4; ++cell) {
    out.cls_logits[t.labels[cell] * 4 + cell] = 40.0;
    for (int e = 0; e < 4; ++e) out.regression[e * 4 + cell] = t.offsets[cell][e];
  }
  const auto l = det_loss(out, t);
  CHECK(l.reg == 0.0);
  CHECK(l.cls < 1e-12);
  CHECK(l.cls >= 0.0);
}

TEST_CASE("regression loss is zero without positives") {
  const auto t = assign_targets(record_with({}), {2, 2, 32}, 2);
  const auto l = det_loss({Tensor({3, 2, 2}, 0.1), Tensor({4, 2, 2}, 5.0)}, t);
  CHECK(l.reg == 0.0);
  CHECK(l.cls > 0.0);
}

TEST_CASE("det_loss matches the brute-force oracle") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 2.0);
  const auto ds = synthesize_toy_dataset(30, 128, 3, 2);
  for (const auto& r : ds.annotations.records) {
    const auto t = assign_targets(r, {4, 4, 32}, 3);
    HeadOutputs out{Tensor({4, 4, 4}), Tensor({4, 4, 4})};
    for (double& v : out.cls_logits.values()) v = n(rng);
    for (double& v : out.regression.values()) v = n(rng);
    const auto l = det_loss(out, t);
    const auto ref = oracle::det_loss(out.cls_logits, out.regression, t.labels, t.offsets, 3);
    CHECK(l.cls == doctest::Approx(ref.cls).epsilon(1e-10));
    CHECK(l.reg == doctest::Approx(ref.reg).epsilon(1e-10));
  }
}

TEST_CASE("detection gradients match finite differences on 64x64") {
  const auto enc = small_encoder();
  CenterCellDetector det(enc, {3, 6, 2});
  const auto img = noise_image(64, 3);
  const auto rec = record_with({{4, 6, 30, 28, 1}, {36, 40, 60, 62, 2}}, 64);
  auto forward = [&](Tape& tape) {
    const auto l = det.loss(tape, enc->forward(tape, tape.constant(img.tensor())), rec);
    return ops::add(tape, l.cls, l.reg);
  };
  auto loss = [&] {
    Tape tape(false);
    return tape.value(forward(tape)).item();
  };
  auto analytic = [&] {
    Tape tape;
    tape.backward(forward(tape));
  };
  for (const auto* group : {&det.head_parameters(), &enc->parameters()}) {
    const auto r = gradcheck::check_parameters(*group, loss, analytic);
    INFO(r.first_failure);
    CHECK(r.ok());
  }
  double enc_grad = 0;
  for (const auto& p : enc->parameters())
    for (double g : p->grad.values()) enc_grad += std::fabs(g);
  CHECK(enc_grad > 0.0);
}

TEST_CASE("head parameter names are disjoint from the encoder's") {
  const auto enc = small_encoder();
  CenterCellDetector det(enc, {});
  std::set<std::string> names;
  for (const auto& p : enc->parameters()) names.insert(p->name);
  for (const auto& p : det.head_parameters()) CHECK(names.insert(p->name).second);
  CHECK(det.encoder().get() == enc.get());
}

TEST_CASE("detector archive round trip reproduces detections") {
  fixtures::TempDir dir;
  const auto enc = small_encoder();
  CenterCellDetector det(enc, {3, 8, 4});
  save_detector(dir / "d.ssad", det, {{"note", "x"}});
  const auto back = load_detector(dir / "d.ssad");
  CHECK(back->kind() == "center_cell");
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto img = noise_image(64, s);
    CHECK(back->detect(img, 0.0, 0.5) == det.detect(img, 0.0, 0.5));
  }
  const auto archive = nn::Archive::load(dir / "d.ssad");
  CHECK(archive.metadata["note"] == "x");
  CHECK_THROWS_AS(load_detector(dir / "missing.ssad"), Error);
}

TEST_CASE("the trainer accepts a second detector adapter unchanged") {
  const auto data = fixtures::tiny_dataset(8);
  auto config = fixtures::tiny_config(2);
  TrainOptions opts;
  opts.model_factory = [](const TrainConfig& c, int n_cat, int in_ch) {
    SsadModel m = build_model(c, n_cat, in_ch);
    m.detector = std::make_shared<PointwiseDetector>(m.encoder, n_cat);
    return m;
  };
  const auto before = [&] {
    auto m = opts.model_factory(config, 3, 1);
    return m.detector->head_parameters()[0]->value;
  }();
  const auto result = train(data, config, opts);
  CHECK(result.model.detector->kind() == "pointwise");
  CHECK(result.model.detector->encoder().get() == result.model.encoder.get());
  CHECK(result.model.reconstruction->encoder().get() == result.model.encoder.get());
  CHECK(result.model.detector->head_parameters()[0]->value != before);
  REQUIRE(result.phases.size() == 1);
  CHECK(result.phases[0].epochs.size() == 2);
  CHECK(result.phases[0].epochs[1].mean.det_cls.has_value());
}

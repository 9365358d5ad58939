#include "ssad/texture.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace ssad {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void require_same_dim(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw Error("embedding dims differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

Tensor as_tensor(const EmbeddingVector& v) { return Tensor({v.dim()}, v.values); }

class ToyConvExtractor final : public FrozenExtractor {
 public:
  explicit ToyConvExtractor(const ExtractorOptions& o) : in_channels_(o.in_channels) {
    std::mt19937_64 rng(o.seed);
    const int widths[] = {8, 16, 32};
    int in = o.in_channels;
    for (int i = 0; i < 3; ++i) {
      layers_.emplace_back("extractor.toy_conv.stage" + std::to_string(i + 1), in, widths[i],
                           ops::ConvGeometry{3, 2, 1}, rng, false);
      in = widths[i];
    }
    for (const auto& l : layers_) {
      params_.push_back(l.weight);
      params_.push_back(l.bias);
    }
  }
  std::string name() const override { return "toy_conv"; }
  int dim() const override { return 32; }
  int in_channels() const override { return in_channels_; }
  const ParameterList& parameters() const override { return params_; }
  Var embed(Tape& tape, Var image) const override {
    Var h = image;
    for (const auto& l : layers_) h = ops::relu(tape, l(tape, h));
    return ops::global_avg_pool(tape, h);
  }

 private:
  int in_channels_;
  std::vector<nn::Conv2d> layers_;
  ParameterList params_;
};

// Oriented Gabor energy: 4 orientations x 2 periods, squared responses
// averaged over the image.
class GaborExtractor final : public FrozenExtractor {
 public:
  explicit GaborExtractor(const ExtractorOptions& o) : in_channels_(o.in_channels) {
    constexpr int k = 7;
    constexpr int orientations = 4;
    const double periods[] = {4.0, 8.0};
    Tensor w({orientations * 2, o.in_channels, k, k});
    int f = 0;
    for (double period : periods) {
      for (int r = 0; r < orientations; ++r, ++f) {
        const double theta = std::numbers::pi * r / orientations;
        const double sigma = 0.56 * period;
        double mean = 0.0;
        std::vector<double> taps(k * k);
        for (int y = 0; y < k; ++y)
          for (int x = 0; x < k; ++x) {
            const double dx = x - k / 2, dy = y - k / 2;
            const double u = dx * std::cos(theta) + dy * std::sin(theta);
            taps[y * k + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) * std::cos(2 * std::numbers::pi * u / period);
            mean += taps[y * k + x] / (k * k);
          }
        for (int c = 0; c < o.in_channels; ++c)
          for (int i = 0; i < k * k; ++i)
            w[((static_cast<std::size_t>(f) * o.in_channels + c) * k * k) + i] = (taps[i] - mean) / o.in_channels;
      }
    }
    weight_ = make_parameter("extractor.gabor_bank.weight", std::move(w), false);
    bias_ = make_parameter("extractor.gabor_bank.bias", Tensor({orientations * 2}), false);
    params_ = {weight_, bias_};
  }
  std::string name() const override { return "gabor_bank"; }
  int dim() const override { return 8; }
  int in_channels() const override { return in_channels_; }
  const ParameterList& parameters() const override { return params_; }
  Var embed(Tape& tape, Var image) const override {
    Var r = ops::conv2d(tape, image, tape.parameter(weight_), tape.parameter(bias_), {7, 2, 3});
    return ops::scale(tape, ops::global_avg_pool(tape, ops::square(tape, r)), 10.0);
  }

 private:
  int in_channels_;
  ParameterPtr weight_;
  ParameterPtr bias_;
  ParameterList params_;
};

// Intensity layout only: a 4x4 grid of mean intensities per channel.
class PixelPoolExtractor final : public FrozenExtractor {
 public:
  explicit PixelPoolExtractor(const ExtractorOptions& o) : in_channels_(o.in_channels) {}
  std::string name() const override { return "pixel_pool"; }
  int dim() const override { return 16 * in_channels_; }
  int in_channels() const override { return in_channels_; }
  const ParameterList& parameters() const override { return params_; }
  Var embed(Tape& tape, Var image) const override {
    const Tensor& x = tape.value(image);
    if (x.dim(1) % 4 != 0 || x.dim(1) != x.dim(2)) throw Error("pixel_pool expects a square image divisible by 4");
    return ops::flatten(tape, ops::avg_pool(tape, image, x.dim(1) / 4));
  }

 private:
  int in_channels_;
  ParameterList params_;
};

ExtractorFactory unavailable(const std::string& name) {
  return [name](const ExtractorOptions&) -> ExtractorHandle {
    throw ExtractorUnavailable("extractor '" + name + "' needs pretrained weights that are not bundled");
  };
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, std::pair<bool, ExtractorFactory>>& registry() {
  static std::map<std::string, std::pair<bool, ExtractorFactory>> r = {
      {"toy_conv", {true, [](const ExtractorOptions& o) { return std::make_shared<ToyConvExtractor>(o); }}},
      {"gabor_bank", {true, [](const ExtractorOptions& o) { return std::make_shared<GaborExtractor>(o); }}},
      {"pixel_pool", {true, [](const ExtractorOptions& o) { return std::make_shared<PixelPoolExtractor>(o); }}},
      {"sam_vit_b", {false, unavailable("sam_vit_b")}},
      {"clip_vit_b32", {false, unavailable("clip_vit_b32")}},
      {"medsam_vit_b", {false, unavailable("medsam_vit_b")}},
  };
  return r;
}

}  // namespace

EmbeddingVector extract_embedding(const ExtractorHandle& extractor, const ImageBuffer& img) {
  if (!extractor) throw Error("extractor is not initialized");
  if (img.channels() != extractor->in_channels()) {
    throw Error("extractor '" + extractor->name() + "' expects " + std::to_string(extractor->in_channels()) +
                " channels");
  }
  Tape tape(false);
  const Tensor& v = tape.value(extractor->embed(tape, tape.constant(img.tensor())));
  return EmbeddingVector{{v.values().begin(), v.values().end()}};
}

double feature_alignment_loss(const EmbeddingVector& v_d, const EmbeddingVector& v_r) {
  Tape tape(false);
  return tape.value(alignment_loss(tape, tape.constant(as_tensor(v_d)), tape.constant(as_tensor(v_r)))).item();
}

double feature_gather_loss(const EmbeddingVector& v_d, const EmbeddingVector& v_r) {
  Tape tape(false);
  return tape.value(gather_loss(tape, tape.constant(as_tensor(v_d)), tape.constant(as_tensor(v_r)))).item();
}

TcLoss tc_loss(const EmbeddingVector& v_d, const EmbeddingVector& v_r, const TcOptions& options) {
  Tape tape(false);
  Var d = tape.constant(as_tensor(v_d));
  Var r = tape.constant(as_tensor(v_r));
  const double align = tape.value(alignment_loss(tape, d, r)).item();
  const double gather = tape.value(gather_loss(tape, d, r, options)).item();
  return {align + gather, align, gather};
}

Var alignment_loss(Tape& tape, Var v_d, Var v_r) {
  const Tensor& a = tape.value(v_d);
  const Tensor& b = tape.value(v_r);
  require_same_dim(a, b);
  std::vector<double> av(a.values().begin(), a.values().end()), bv(b.values().begin(), b.values().end());
  const double na = std::sqrt(dot(av, av)), nb = std::sqrt(dot(bv, bv));
  if (na == 0.0 || nb == 0.0) throw Error("cosine alignment is undefined for a zero embedding");
  const double ab = dot(av, bv);
  const double cos = ab / (na * nb);
  const double value = std::clamp(1.0 - cos, 0.0, 2.0);
  return tape.record(Tensor::scalar(value), {v_d, v_r}, [=](Tape& t, Var out) {
    const double g = t.grad(out)[0];
    // d cos / da = b / (|a||b|) - cos * a / |a|^2
    auto accumulate = [&](Var target, const std::vector<double>& self, const std::vector<double>& other, double ns,
                          double no) {
      if (!t.requires_grad(target)) return;
      Tensor& gt = t.grad_buffer(target);
      for (std::size_t i = 0; i < self.size(); ++i) {
        gt[i] -= g * (other[i] / (ns * no) - cos * self[i] / (ns * ns));
      }
    };
    accumulate(v_d, av, bv, na, nb);
    accumulate(v_r, bv, av, nb, na);
  });
}

Var gather_loss(Tape& tape, Var v_d, Var v_r, const TcOptions& options) {
  const Tensor& a = tape.value(v_d);
  const Tensor& b = tape.value(v_r);
  require_same_dim(a, b);
  std::vector<double> av(a.values().begin(), a.values().end()), bv(b.values().begin(), b.values().end());
  double na = std::sqrt(dot(av, av)), nb = std::sqrt(dot(bv, bv));
  if (options.gather_on_normalized) {
    // Unit vectors: the gather term collapses to zero.
    na = na > 0.0 ? 1.0 : 0.0;
    nb = nb > 0.0 ? 1.0 : 0.0;
    return tape.record(Tensor::scalar(std::abs(na - nb)), {v_d, v_r}, [](Tape&, Var) {});
  }
  const double diff = na - nb;
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  return tape.record(Tensor::scalar(std::abs(diff)), {v_d, v_r}, [=](Tape& t, Var out) {
    const double g = t.grad(out)[0] * sign;
    if (t.requires_grad(v_d) && na > 0.0) {
      Tensor& gd = t.grad_buffer(v_d);
      for (std::size_t i = 0; i < av.size(); ++i) gd[i] += g * av[i] / na;
    }
    if (t.requires_grad(v_r) && nb > 0.0) {
      Tensor& gr = t.grad_buffer(v_r);
      for (std::size_t i = 0; i < bv.size(); ++i) gr[i] -= g * bv[i] / nb;
    }
  });
}

std::vector<std::string> extractor_names() {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> names;
  for (const auto& [name, entry] : registry()) names.push_back(name);
  return names;
}

bool extractor_available(const std::string& name) {
  std::lock_guard lock(registry_mutex());
  auto it = registry().find(name);
  return it != registry().end() && it->second.first;
}

ExtractorHandle make_extractor(const std::string& name, const ExtractorOptions& options) {
  ExtractorFactory factory;
  {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(name);
    if (it == registry().end()) throw Error("unknown extractor '" + name + "'");
    factory = it->second.second;
  }
  return factory(options);
}

void register_extractor(const std::string& name, ExtractorFactory factory) {
  std::lock_guard lock(registry_mutex());
  registry()[name] = {true, std::move(factory)};
}

}  // namespace ssad

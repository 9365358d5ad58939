#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ssad/texture.hpp"

using namespace ssad;

namespace {

ImageBuffer noise_image(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageBuffer img(1, size, size);
  for (double& v : img.mutable_tensor().values()) v = u(rng);
  return img;
}

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector{std::move(v)}; }

}  // namespace

TEST_CASE("alignment loss examples") {
  CHECK(feature_alignment_loss(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(0.0));
  CHECK(feature_alignment_loss(vec({1, -2, 3}), vec({-1, 2, -3})) == doctest::Approx(2.0));
  CHECK(feature_alignment_loss(vec({1, 0}), vec({1, 1})) == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)));
  CHECK(feature_alignment_loss(vec({1, 0}), vec({1, 1})) == doctest::Approx(0.2929).epsilon(1e-4));
}

TEST_CASE("alignment loss rejects zero vectors and mismatched dims") {
  CHECK_THROWS_AS(feature_alignment_loss(vec({0, 0}), vec({1, 1})), Error);
  CHECK_THROWS_AS(feature_alignment_loss(vec({1, 0}), vec({1, 1, 1})), Error);
}

TEST_CASE("gather loss examples") {
  CHECK(feature_gather_loss(vec({3, 4}), vec({3, 4})) == 0.0);
  CHECK(feature_gather_loss(vec({3, 4}), vec({0, 2})) == doctest::Approx(3.0));
  CHECK(feature_gather_loss(vec({3, 4}), vec({0, -2})) == feature_gather_loss(vec({3, 4}), vec({0, 2})));
}

TEST_CASE("tc loss examples") {
  const auto same = tc_loss(vec({0.5, -1}), vec({0.5, -1}));
  CHECK(same.total == doctest::Approx(0.0));
  CHECK(same.align == doctest::Approx(0.0));
  CHECK(same.gather == 0.0);
  const auto r = tc_loss(vec({1, 0}), vec({2, 0}));
  CHECK(r.align == doctest::Approx(0.0));
  CHECK(r.gather == doctest::Approx(1.0));
  CHECK(r.total == doctest::Approx(1.0));
}

TEST_CASE("tc loss properties on random vectors") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(5), b(5);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    const auto r = tc_loss(vec(a), vec(b));
    CHECK(r.total == r.align + r.gather);
    CHECK(r.align >= 0.0);
    CHECK(r.align <= 2.0);
    CHECK(r.gather >= 0.0);
    CHECK(r.align == doctest::Approx(oracle::alignment(a, b)).epsilon(1e-9));
    CHECK(r.gather == doctest::Approx(oracle::gather(a, b)).epsilon(1e-9));
    // Positive scaling of vR only moves the gather term.
    std::vector<double> scaled = b;
    for (auto& x : scaled) x *= 3.5;
    const auto s = tc_loss(vec(a), vec(scaled));
    CHECK(s.align == doctest::Approx(r.align).epsilon(1e-9));
    CHECK(s.gather == doctest::Approx(oracle::gather(a, scaled)).epsilon(1e-9));
  }
}

TEST_CASE("normalized gather reading collapses to zero") {
  CHECK(tc_loss(vec({3, 4}), vec({0, 2}), TcOptions{true}).gather == 0.0);
}

TEST_CASE("extractors are deterministic and match their declared dim") {
  for (const std::string name : {"toy_conv", "gabor_bank", "pixel_pool"}) {
    const auto ex = make_extractor(name);
    const auto img = noise_image(512, 4);
    const auto a = extract_embedding(ex, img);
    CHECK(a.dim() == ex->dim());
    CHECK(a == extract_embedding(ex, img));
    for (const auto& p : ex->parameters()) CHECK_FALSE(p->trainable);
  }
}

TEST_CASE("extractor registry") {
  const auto names = extractor_names();
  CHECK(std::find(names.begin(), names.end(), "toy_conv") != names.end());
  CHECK(extractor_available("toy_conv"));
  for (const std::string stub : {"sam_vit_b", "clip_vit_b32", "medsam_vit_b"}) {
    CHECK_FALSE(extractor_available(stub));
    CHECK_THROWS_AS(make_extractor(stub), ExtractorUnavailable);
  }
  CHECK_THROWS_AS(make_extractor("nope"), Error);
  CHECK_THROWS_AS(extract_embedding(nullptr, noise_image(64, 1)), Error);

  register_extractor("test_mean", [](const ExtractorOptions& o) { return make_extractor("pixel_pool", o); });
  CHECK(extractor_available("test_mean"));
  CHECK(make_extractor("test_mean")->dim() == 16);
}

TEST_CASE("tc gradient with respect to image pixels matches finite differences") {
  const auto ex = make_extractor("toy_conv");
  const auto original = noise_image(64, 7);
  const auto recon = noise_image(64, 8);
  auto pixels = make_parameter("recon.pixels", recon.tensor());
  auto forward = [&](Tape& tape) {
    Var v_d = ex->embed(tape, tape.constant(original.tensor()));
    Var v_r = ex->embed(tape, tape.parameter(pixels));
    return ops::add(tape, alignment_loss(tape, v_d, v_r), gather_loss(tape, v_d, v_r));
  };
  auto loss = [&] {
    Tape tape(false);
    return tape.value(forward(tape)).item();
  };
  auto analytic = [&] {
    Tape tape;
    tape.backward(forward(tape));
  };
  gradcheck::Options o;
  o.per_tensor = 200;
  const auto r = gradcheck::check_parameters({pixels}, loss, analytic, o);
  INFO(r.first_failure);
  CHECK(r.ok());
  for (const auto& p : ex->parameters()) {
    const bool untouched = p->grad.empty() || std::all_of(p->grad.values().begin(), p->grad.values().end(), [](double g) { return g == 0.0; });
    CHECK(untouched);
  }
}

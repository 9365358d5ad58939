#include <doctest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ssad/reconstruction.hpp"

using namespace ssad;

namespace {

ImageBuffer noise_image(int size, std::uint64_t seed, int channels = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageBuffer img(channels, size, size);
  for (double& v : img.mutable_tensor().values()) v = u(rng);
  return img;
}

EncoderHandle small_encoder(int channels = 1) {
  EncoderConfig c;
  c.in_channels = channels;
  c.widths = {4, 8, 8, 16};
  c.out_channels = 16;
  return reference_encoder(c);
}

}  // namespace

TEST_CASE("decode maps 16x16x64 features to a 512x512 image") {
  ReconstructionBranch branch(reference_encoder());
  FeatureMap f{Tensor({64, 16, 16}, 0.1)};
  const auto img = branch.decode(f, 512);
  CHECK(img.height() == 512);
  CHECK(img.width() == 512);
  CHECK(img.channels() == 1);
  CHECK(branch.decode(f, 512) == img);
  CHECK(branch.upsample_factors().first * branch.upsample_factors().second == 32);
}

TEST_CASE("decode rejects a target size that does not match the features") {
  ReconstructionBranch branch(reference_encoder());
  CHECK_THROWS_AS(branch.decode(FeatureMap{Tensor({64, 2, 2}, 0.0)}, 128), Error);
  CHECK_THROWS_AS(branch.decode(FeatureMap{Tensor({32, 2, 2}, 0.0)}, 64), Error);
}

TEST_CASE("decoder output keeps the pipeline channel count") {
  ReconstructionBranch branch(small_encoder(3));
  const auto out = branch.reconstruct(noise_image(64, 1, 3), generate_mask(4, 4, 0.5, 3, 16));
  CHECK(out.image.channels() == 3);
  CHECK(out.loss_recon >= 0.0);
}

TEST_CASE("decoder and mask-token gradients match finite differences on 64x64") {
  DecoderConfig dc;
  dc.hidden1 = 6;
  dc.hidden2 = 4;
  dc.fill = MaskFill::learned_token_value;
  const auto enc = small_encoder();
  ReconstructionBranch branch(enc, dc);
  branch.decoder_parameters().back()->value[0] = 0.3;
  const auto img = noise_image(64, 5);
  const auto mask = generate_mask(4, 4, 0.6, 8, 16);
  auto forward = [&](Tape& tape) {
    Var rec = branch.decode(tape, enc->forward(tape, branch.masked_image(tape, img, mask)));
    return recon_loss(tape, rec, img, mask);
  };
  auto loss = [&] {
    Tape tape(false);
    return tape.value(forward(tape)).item();
  };
  auto analytic = [&] {
    Tape tape;
    tape.backward(forward(tape));
  };
  const auto r = gradcheck::check_parameters(branch.decoder_parameters(), loss, analytic);
  INFO(r.first_failure);
  CHECK(r.ok());
  const auto re = gradcheck::check_parameters(enc->parameters(), loss, analytic);
  INFO(re.first_failure);
  CHECK(re.ok());
}

TEST_CASE("recon_loss is zero for a perfect reconstruction") {
  const auto img = noise_image(32, 2);
  CHECK(recon_loss(img, img, generate_mask(4, 4, 0.5, 1, 8)) == 0.0);
}

TEST_CASE("recon_loss of ones against zeros is one") {
  for (std::uint64_t s = 0; s < 5; ++s)
    CHECK(recon_loss(ImageBuffer(1, 32, 32, 1.0), ImageBuffer(1, 32, 32, 0.0), generate_mask(4, 4, 0.3, s, 8)) == 1.0);
}

TEST_CASE("recon_loss matches a per-pixel loop over masked patches") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    const int ch = t % 2 ? 3 : 1;
    const auto a = noise_image(32, rng(), ch), b = noise_image(32, rng(), ch);
    const auto mask = generate_mask(4, 4, 0.1 + 0.8 * (t / 50.0), rng(), 8);
    const double expected = oracle::masked_l1(a, b, mask);
    CHECK(recon_loss(a, b, mask) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("recon_loss ignores unmasked pixels") {
  const auto a = noise_image(32, 3), b = noise_image(32, 4);
  const auto mask = generate_mask(4, 4, 0.5, 6, 8);
  auto c = b;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (!mask.is_masked((y / 8) * 4 + x / 8)) c.at(0, y, x) = 1.0 - c.at(0, y, x);
  CHECK(recon_loss(a, b, mask) == recon_loss(a, c, mask));
}

TEST_CASE("recon_loss errors on an empty mask or mismatched geometry") {
  const auto a = noise_image(32, 1);
  CHECK_THROWS_AS(recon_loss(a, a, MaskSpec{4, 4, 8, {}, 0}), Error);
  CHECK_THROWS_AS(recon_loss(a, noise_image(64, 1), generate_mask(4, 4, 0.5, 1, 8)), Error);
  CHECK_THROWS_AS(recon_loss(a, a, generate_mask(8, 8, 0.5, 1, 8)), Error);
}

TEST_CASE("reconstruction gradient reaches the shared encoder") {
  const auto enc = small_encoder();
  ReconstructionBranch branch(enc);
  const auto img = noise_image(64, 9);
  const auto mask = generate_mask(4, 4, 0.6, 2, 16);
  zero_grads(enc->parameters());
  Tape tape;
  tape.backward(recon_loss(tape, branch.decode(tape, enc->forward(tape, branch.masked_image(tape, img, mask))), img, mask));
  double total = 0;
  for (const auto& p : enc->parameters())
    for (double g : p->grad.values()) total += std::fabs(g);
  CHECK(total > 0.0);
  CHECK(branch.encoder().get() == enc.get());
}

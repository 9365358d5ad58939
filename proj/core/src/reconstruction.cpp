#include "ssad/reconstruction.hpp"

#include <bit>
#include <cmath>

namespace ssad {
namespace {

std::pair<int, int> split_stride(int stride) {
  if (stride <= 0 || !std::has_single_bit(static_cast<unsigned>(stride))) {
    throw Error("decoder needs a power-of-two encoder stride, got " + std::to_string(stride));
  }
  const int log2 = std::countr_zero(static_cast<unsigned>(stride));
  const int first = 1 << (log2 / 2);
  return {first, stride / first};
}

std::mt19937_64 seeded(std::uint64_t seed) { return std::mt19937_64(seed); }

void check_geometry(int height, int width, const MaskSpec& mask) {
  if (height != mask.image_height() || width != mask.image_width()) throw Error("reconstruction geometry mismatch");
  if (mask.masked_indices.empty()) throw Error("reconstruction loss needs a nonempty mask");
}

}  // namespace

ReconstructionBranch::ReconstructionBranch(EncoderHandle encoder, const DecoderConfig& config)
    : encoder_(std::move(encoder)),
      fill_(config.fill),
      up1_([&] {
        auto rng = seeded(config.seed);
        const int f = split_stride(encoder_->stride()).first;
        return nn::ConvTranspose2d("decoder.up1", encoder_->out_channels(), config.hidden1, {f, f, 0}, rng);
      }()),
      up2_([&] {
        auto rng = seeded(config.seed + 1);
        const int f = split_stride(encoder_->stride()).second;
        return nn::ConvTranspose2d("decoder.up2", config.hidden1, config.hidden2, {f, f, 0}, rng);
      }()),
      project_([&] {
        auto rng = seeded(config.seed + 2);
        return nn::Conv2d("decoder.project", config.hidden2, encoder_->in_channels(), {1, 1, 0}, rng);
      }()) {
  params_ = merge_parameters({up1_.parameters(), up2_.parameters(), project_.parameters()});
  if (fill_ == MaskFill::learned_token_value) {
    mask_token_ = make_parameter("decoder.mask_token", Tensor({encoder_->in_channels()}, 0.0));
    params_.push_back(mask_token_);
  }
}

Var ReconstructionBranch::masked_image(Tape& tape, const ImageBuffer& img, const MaskSpec& mask) const {
  if (img.height() != mask.image_height() || img.width() != mask.image_width()) {
    throw Error("mask geometry does not match image");
  }
  Var fill = mask_token_ ? tape.parameter(mask_token_) : tape.constant(Tensor({img.channels()}, 0.0));
  return ops::masked_fill(tape, tape.constant(img.tensor()), mask.pixel_mask(), fill);
}

Var ReconstructionBranch::decode(Tape& tape, Var features) const {
  Var h = ops::relu(tape, up1_(tape, features));
  h = ops::relu(tape, up2_(tape, h));
  return ops::sigmoid(tape, project_(tape, h));
}

ImageBuffer ReconstructionBranch::decode(const FeatureMap& features, int target_size) const {
  if (features.channels() != encoder_->out_channels() || features.rows() * encoder_->stride() != target_size ||
      features.cols() * encoder_->stride() != target_size) {
    throw Error("decode: features " + shape_string(features.values.shape()) + " cannot produce a " +
                std::to_string(target_size) + "px image at stride " + std::to_string(encoder_->stride()));
  }
  Tape tape(false);
  Var out = decode(tape, tape.constant(features.values));
  return image_from_tensor_clamped(tape.value(out));
}

ReconstructionOutput ReconstructionBranch::reconstruct(const ImageBuffer& original, const MaskSpec& mask) const {
  Tape tape(false);
  Var rec = decode(tape, encoder_->forward(tape, masked_image(tape, original, mask)));
  Var loss = recon_loss(tape, rec, original, mask);
  return {image_from_tensor_clamped(tape.value(rec)), tape.value(loss).item()};
}

double recon_loss(const ImageBuffer& original, const ImageBuffer& reconstructed, const MaskSpec& mask) {
  if (original.channels() != reconstructed.channels() || original.height() != reconstructed.height() ||
      original.width() != reconstructed.width()) {
    throw Error("reconstruction and original differ in shape");
  }
  Tape tape(false);
  return tape.value(recon_loss(tape, tape.constant(reconstructed.tensor()), original, mask)).item();
}

Var recon_loss(Tape& tape, Var reconstructed, const ImageBuffer& original, const MaskSpec& mask) {
  const Tensor& rec = tape.value(reconstructed);
  if (!rec.same_shape(original.tensor())) throw Error("reconstruction and original differ in shape");
  check_geometry(original.height(), original.width(), mask);
  const int c = original.channels(), w = original.width();
  const Tensor m = mask.pixel_mask();
  double sum = 0.0;
  std::size_t count = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < original.height(); ++y)
      for (int x = 0; x < w; ++x)
        if (m[static_cast<std::size_t>(y) * w + x] != 0.0) {
          sum += std::abs(rec.at(ch, y, x) - original.at(ch, y, x));
          ++count;
        }
  const double inv = 1.0 / static_cast<double>(count);
  return tape.record(Tensor::scalar(sum * inv), {reconstructed}, [=, orig = original.tensor()](Tape& t, Var out) {
    const double g = t.grad(out)[0] * inv;
    const Tensor& r = t.value(reconstructed);
    Tensor& gr = t.grad_buffer(reconstructed);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < r.dim(1); ++y)
        for (int x = 0; x < w; ++x)
          if (m[static_cast<std::size_t>(y) * w + x] != 0.0) {
            const double d = r.at(ch, y, x) - orig.at(ch, y, x);
            gr.at(ch, y, x) += g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
          }
  });
}

}  // namespace ssad

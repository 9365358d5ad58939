#pragma once

#include <cstdint>

#include "ssad/data.hpp"
#include "ssad/encoder.hpp"

namespace ssad {

struct DecoderConfig {
  int hidden1 = 32;
  int hidden2 = 16;
  MaskFill fill = MaskFill::zero;
  std::uint64_t seed = 1;
};

struct ReconstructionOutput {
  ImageBuffer image;
  double loss_recon = 0.0;
};

/// Masked-image-modeling branch: two transposed-conv upsampling stages whose
/// factors multiply to the encoder stride, then a pointwise projection and a
/// sigmoid back to image range.
class ReconstructionBranch {
 public:
  ReconstructionBranch(EncoderHandle encoder, const DecoderConfig& config = {});

  const EncoderHandle& encoder() const noexcept { return encoder_; }
  /// Decoder weights, plus the mask token when the fill is learned.
  const ParameterList& decoder_parameters() const noexcept { return params_; }
  MaskFill fill() const noexcept { return fill_; }
  std::pair<int, int> upsample_factors() const noexcept { return {up1_.geometry.stride, up2_.geometry.stride}; }

  Var masked_image(Tape& tape, const ImageBuffer& img, const MaskSpec& mask) const;
  Var decode(Tape& tape, Var features) const;

  ImageBuffer decode(const FeatureMap& features, int target_size) const;
  ReconstructionOutput reconstruct(const ImageBuffer& original, const MaskSpec& mask) const;

 private:
  EncoderHandle encoder_;
  MaskFill fill_;
  nn::ConvTranspose2d up1_;
  nn::ConvTranspose2d up2_;
  nn::Conv2d project_;
  ParameterPtr mask_token_;
  ParameterList params_;
};

/// Mean absolute error over masked pixels only (all channels). Throws on an
/// empty mask or mismatched geometry.
double recon_loss(const ImageBuffer& original, const ImageBuffer& reconstructed, const MaskSpec& mask);
Var recon_loss(Tape& tape, Var reconstructed, const ImageBuffer& original, const MaskSpec& mask);

}  // namespace ssad

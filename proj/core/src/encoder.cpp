#include "ssad/encoder.hpp"

namespace ssad {

void Encoder::check_input(int channels, int height, int width) const {
  if (channels != in_channels()) {
    throw Error("encoder expects " + std::to_string(in_channels()) + " channels, got " + std::to_string(channels));
  }
  if (height % stride() != 0 || width % stride() != 0) {
    throw Error("image " + std::to_string(height) + "x" + std::to_string(width) + " is not divisible by encoder stride " +
                std::to_string(stride()));
  }
}

FeatureMap Encoder::encode(const ImageBuffer& img) const {
  check_input(img.channels(), img.height(), img.width());
  Tape tape(false);
  Var out = forward(tape, tape.constant(img.tensor()));
  return FeatureMap{tape.value(out)};
}

ConvEncoder::ConvEncoder(const EncoderConfig& config)
    : config_(config), in_channels_(config.in_channels), out_channels_(config.out_channels) {
  if (config.in_channels != 1 && config.in_channels != 3) throw Error("encoder input must have 1 or 3 channels");
  if (config.out_channels <= 0) throw Error("encoder out_channels must be positive");
  if (config.widths.size() != 4) throw Error("encoder needs exactly four stage widths");
  std::mt19937_64 rng(config.seed);
  int in = config.in_channels;
  std::vector<int> widths = config.widths;
  widths.push_back(config.out_channels);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] <= 0) throw Error("encoder stage widths must be positive");
    layers_.emplace_back("encoder.stage" + std::to_string(i + 1), in, widths[i], ops::ConvGeometry{3, 2, 1}, rng);
    in = widths[i];
  }
  for (const auto& l : layers_) {
    params_.push_back(l.weight);
    params_.push_back(l.bias);
  }
}

Var ConvEncoder::forward(Tape& tape, Var image) const {
  const Tensor& x = tape.value(image);
  check_input(x.dim(0), x.dim(1), x.dim(2));
  Var h = image;
  for (const auto& l : layers_) h = ops::relu(tape, l(tape, h));
  return h;
}

EncoderHandle reference_encoder(const EncoderConfig& config) { return std::make_shared<ConvEncoder>(config); }

}  // namespace ssad

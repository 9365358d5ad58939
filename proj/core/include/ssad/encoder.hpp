#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ssad/image.hpp"
#include "ssad/nn.hpp"

namespace ssad {

/// Encoder output: (channels, rows, cols) with rows = image height / stride.
struct FeatureMap {
  Tensor values;

  int channels() const { return values.dim(0); }
  int rows() const { return values.dim(1); }
  int cols() const { return values.dim(2); }
};

/// Contract shared by the reconstruction and detection branches. Both branches
/// hold the same instance; its parameters receive gradients from every loss.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual int stride() const = 0;
  virtual int in_channels() const = 0;
  virtual int out_channels() const = 0;
  virtual const ParameterList& parameters() const = 0;
  /// Records the forward pass; `image` must be (in_channels, H, W) with H and
  /// W divisible by stride().
  virtual Var forward(Tape& tape, Var image) const = 0;

  /// Evaluation-mode forward without gradient recording.
  FeatureMap encode(const ImageBuffer& img) const;
  void check_input(int channels, int height, int width) const;
};

using EncoderHandle = std::shared_ptr<Encoder>;

struct EncoderConfig {
  int in_channels = 1;
  int out_channels = 64;
  /// Widths of the first four stride-2 stages; a fifth stage emits out_channels.
  std::vector<int> widths{8, 16, 32, 64};
  std::uint64_t seed = 0;
};

/// Five 3x3 stride-2 conv + ReLU stages: total stride 32.
class ConvEncoder final : public Encoder {
 public:
  explicit ConvEncoder(const EncoderConfig& config);

  int stride() const override { return 1 << static_cast<int>(layers_.size()); }
  int in_channels() const override { return in_channels_; }
  int out_channels() const override { return out_channels_; }
  const ParameterList& parameters() const override { return params_; }
  Var forward(Tape& tape, Var image) const override;
  const EncoderConfig& config() const noexcept { return config_; }

 private:
  EncoderConfig config_;
  int in_channels_;
  int out_channels_;
  std::vector<nn::Conv2d> layers_;
  ParameterList params_;
};

EncoderHandle reference_encoder(const EncoderConfig& config = {});

}  // namespace ssad

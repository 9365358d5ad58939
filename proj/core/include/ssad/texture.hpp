#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ssad/image.hpp"
#include "ssad/nn.hpp"

namespace ssad {

struct EmbeddingVector {
  std::vector<double> values;
  int dim() const { return static_cast<int>(values.size()); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Fixed-weight embedding network. Its parameters are never trainable, but the
/// embedding is differentiable with respect to the input image so the texture
/// loss can train whatever produced that image.
class FrozenExtractor {
 public:
  virtual ~FrozenExtractor() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual int in_channels() const = 0;
  virtual const ParameterList& parameters() const = 0;
  /// Image (C, H, W) -> (dim). Accepts any H, W divisible by 8.
  virtual Var embed(Tape& tape, Var image) const = 0;
};

using ExtractorHandle = std::shared_ptr<const FrozenExtractor>;

EmbeddingVector extract_embedding(const ExtractorHandle& extractor, const ImageBuffer& img);

/// Cosine alignment 1 - cos(vD, vR), in [0, 2]. Throws on zero vectors.
double feature_alignment_loss(const EmbeddingVector& v_d, const EmbeddingVector& v_r);
/// | ||vD||_2 - ||vR||_2 | on the raw embeddings.
double feature_gather_loss(const EmbeddingVector& v_d, const EmbeddingVector& v_r);

struct TcLoss {
  double total = 0.0;
  double align = 0.0;
  double gather = 0.0;
};

struct TcOptions {
  /// L2-normalize both embeddings before the gather term. Both norms then
  /// equal one, so the term is identically zero; kept only for audits.
  bool gather_on_normalized = false;
};

TcLoss tc_loss(const EmbeddingVector& v_d, const EmbeddingVector& v_r, const TcOptions& options = {});

Var alignment_loss(Tape& tape, Var v_d, Var v_r);
Var gather_loss(Tape& tape, Var v_d, Var v_r, const TcOptions& options = {});

class ExtractorUnavailable : public Error {
 public:
  using Error::Error;
};

struct ExtractorOptions {
  int in_channels = 1;
  std::uint64_t seed = 7;
};

using ExtractorFactory = std::function<ExtractorHandle(const ExtractorOptions&)>;

/// Built-in names: toy_conv (default), gabor_bank, pixel_pool, and the
/// weight-less adapters sam_vit_b, clip_vit_b32, medsam_vit_b which throw
/// ExtractorUnavailable when constructed.
std::vector<std::string> extractor_names();
bool extractor_available(const std::string& name);
ExtractorHandle make_extractor(const std::string& name, const ExtractorOptions& options = {});
/// Adds or replaces a registry entry.
void register_extractor(const std::string& name, ExtractorFactory factory);

}  // namespace ssad

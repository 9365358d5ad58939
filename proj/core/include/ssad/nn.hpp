#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <string>

#include "ssad/autograd.hpp"
#include "ssad/ops.hpp"

namespace ssad::nn {

/// Convolution layer: He-normal weights, zero bias.
struct Conv2d {
  ParameterPtr weight;
  ParameterPtr bias;
  ops::ConvGeometry geometry;

  Conv2d(const std::string& name, int in_channels, int out_channels, ops::ConvGeometry g, std::mt19937_64& rng,
         bool trainable = true);
  Var operator()(Tape& tape, Var x) const;
  ParameterList parameters() const { return {weight, bias}; }
};

/// Transposed convolution layer; weight layout (in, out, k, k).
struct ConvTranspose2d {
  ParameterPtr weight;
  ParameterPtr bias;
  ops::ConvGeometry geometry;

  ConvTranspose2d(const std::string& name, int in_channels, int out_channels, ops::ConvGeometry g,
                  std::mt19937_64& rng, bool trainable = true);
  Var operator()(Tape& tape, Var x) const;
  ParameterList parameters() const { return {weight, bias}; }
};

std::size_t parameter_count(const ParameterList& params);

/// Flat name -> tensor archive with a JSON metadata header.
///
/// Layout: 8-byte magic "SSADARC1", little-endian u64 header length, the
/// header JSON, then every tensor's float64 values in header order.
struct Archive {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;

  void put(const ParameterList& params);
  /// Copies stored values into `params`; every parameter must be present
  /// with a matching shape.
  void restore(const ParameterList& params) const;
  bool contains(const std::string& name) const { return tensors.count(name) != 0; }

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);
};

}  // namespace ssad::nn

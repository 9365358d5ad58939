#pragma once

#include <utility>
#include <vector>

#include "ssad/autograd.hpp"

/// Differentiable primitives recorded on a Tape. Spatial ops take rank-3
/// (channels, rows, cols) inputs.
namespace ssad::ops {

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int padding = 0;
};

int conv_output_size(int input, const ConvGeometry& g);
int conv_transpose_output_size(int input, const ConvGeometry& g);

/// Cross-correlation. weight: (out, in, k, k); bias: (out).
Var conv2d(Tape& tape, Var x, Var weight, Var bias, ConvGeometry g);
/// Adjoint of conv2d. weight: (in, out, k, k); bias: (out).
Var conv_transpose2d(Tape& tape, Var x, Var weight, Var bias, ConvGeometry g);

Var relu(Tape& tape, Var x);
Var sigmoid(Tape& tape, Var x);
Var square(Tape& tape, Var x);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var x, double factor);
/// (C, H, W) -> (C)
Var global_avg_pool(Tape& tape, Var x);
/// Non-overlapping mean pooling with window `k`; H and W must be multiples of k.
Var avg_pool(Tape& tape, Var x, int k);
Var flatten(Tape& tape, Var x);
/// Σ weight_i · term_i over single-element vars.
Var weighted_sum(Tape& tape, const std::vector<std::pair<double, Var>>& terms);
/// Replaces pixels where `mask(y, x)` is nonzero with fill[c]. mask: (H, W);
/// fill: (C).
Var masked_fill(Tape& tape, Var x, const Tensor& mask, Var fill);

}  // namespace ssad::ops

#pragma once

#include <cstddef>

#include "pmag/grid.hpp"

namespace pmag {

struct PostprocessConfig {
  double alpha = 10.0;
  std::size_t kernel = 3;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  void validate() const;
};

/// Affine map onto [0, 1]; a constant map becomes constant 0.5.
TokenHeatmap normalize_unit(const TokenHeatmap& heat);

/// sigmoid(alpha * z) with z the population z-score of each element.
/// Zero spread yields constant 0.5.
TokenHeatmap sigmoid_enhance(const TokenHeatmap& heat, double alpha);

/// k x k box mean with clamp-to-edge padding. k must be odd.
TokenHeatmap smooth_uniform(const TokenHeatmap& heat, std::size_t k);

/// Bilinear resize with half-pixel centers: output pixel i reads source
/// coordinate (i + 0.5) * in / out - 0.5, clamped to the grid.
PerceptionMap upsample_bilinear(const TokenHeatmap& heat, std::size_t out_h, std::size_t out_w);

/// Bilinear read at a continuous grid coordinate, clamped to the edges.
double sample_bilinear(const Grid2<double>& grid, double row, double col);

/// normalize_unit -> sigmoid_enhance -> smooth_uniform -> upsample_bilinear.
/// The enhanced map is clamped to [FLT_MIN, 1 - 2^-24] before smoothing so
/// the result stays inside (0, 1) even after single-precision storage.
PerceptionMap postprocess_pipeline(const TokenHeatmap& heat, const PostprocessConfig& cfg);

}  // namespace pmag

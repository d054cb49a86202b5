#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pmag/grid.hpp"

namespace pmag {

struct StackShape {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  std::size_t elements() const noexcept { return layers * heads * grid_h * grid_w; }
  friend bool operator==(const StackShape&, const StackShape&) = default;
};

/// Attention from the current query position to the visual-token grid,
/// laid out as [layer, head, row, col] in C order.
class AttnStack {
 public:
  AttnStack() = default;
  /// Zero-filled stack.
  explicit AttnStack(StackShape shape);
  /// Throws ValidationError on zero dims, size mismatch, negative or
  /// non-finite values.
  AttnStack(StackShape shape, std::vector<float> values);

  const StackShape& shape() const noexcept { return shape_; }
  std::size_t layers() const noexcept { return shape_.layers; }
  std::size_t heads() const noexcept { return shape_.heads; }
  std::size_t grid_h() const noexcept { return shape_.grid_h; }
  std::size_t grid_w() const noexcept { return shape_.grid_w; }

  float at(std::size_t layer, std::size_t head, std::size_t row, std::size_t col) const {
    return values_[index(layer, head, row, col)];
  }
  // Unchecked write; callers keep values finite and nonnegative.
  float& at(std::size_t layer, std::size_t head, std::size_t row, std::size_t col) {
    return values_[index(layer, head, row, col)];
  }

  std::span<const float> values() const noexcept { return values_; }
  const std::vector<float>& storage() const noexcept { return values_; }

  friend bool operator==(const AttnStack&, const AttnStack&) = default;

 private:
  std::size_t index(std::size_t l, std::size_t h, std::size_t r, std::size_t c) const noexcept {
    return ((l * shape_.heads + h) * shape_.grid_h + r) * shape_.grid_w + c;
  }

  StackShape shape_;
  std::vector<float> values_;
};

/// Sums, over layers [start_layer, layers), the per-token maximum across
/// heads. Accumulation runs in double, layer by layer in ascending order.
TokenHeatmap aggregate_heatmap(const AttnStack& attn, std::size_t start_layer);

/// Zeroes every non-attendable token in every layer and head.
AttnStack apply_mask(const AttnStack& attn, const TokenMask& mask);

/// Tokens of the higher-centroid group of a 1-D 2-means over the attendable
/// heatmap values. Centroids start at the min and max; Lloyd iterations run
/// until assignments stop changing (at most 100); ties go to the high group.
/// Returns an empty set when all attendable values are equal. Coordinates
/// come back in row-major order.
std::vector<TokenCoord> cluster_high_group(const TokenHeatmap& heat, const TokenMask& mask);

}  // namespace pmag

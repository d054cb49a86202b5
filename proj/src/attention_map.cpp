#include "pmag/attention_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pmag/errors.hpp"

namespace pmag {

namespace {

void check_shape(const StackShape& s) {
  if (s.layers == 0 || s.heads == 0 || s.grid_h == 0 || s.grid_w == 0) {
    throw ValidationError("attention stack dimensions must all be >= 1");
  }
}

constexpr int kMaxLloydIterations = 100;

}  // namespace

AttnStack::AttnStack(StackShape shape) : shape_(shape), values_(shape.elements(), 0.0f) {
  check_shape(shape_);
}

AttnStack::AttnStack(StackShape shape, std::vector<float> values)
    : shape_(shape), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != shape_.elements()) {
    throw ValidationError("attention stack holds " + std::to_string(values_.size()) +
                          " values, shape needs " + std::to_string(shape_.elements()));
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw ValidationError("attention stack contains a non-finite value");
    if (v < 0.0f) throw ValidationError("attention stack contains a negative value");
  }
}

TokenHeatmap aggregate_heatmap(const AttnStack& attn, std::size_t start_layer) {
  if (start_layer >= attn.layers()) {
    throw RangeError("start layer " + std::to_string(start_layer) + " out of range for " +
                     std::to_string(attn.layers()) + " layers");
  }
  const std::size_t gh = attn.grid_h();
  const std::size_t gw = attn.grid_w();
  TokenHeatmap out(gh, gw, 0.0);
  std::vector<float> head_max(gh * gw);
  const auto vals = attn.values();
  const std::size_t plane = gh * gw;
  for (std::size_t l = start_layer; l < attn.layers(); ++l) {
    const float* layer = vals.data() + l * attn.heads() * plane;
    std::copy(layer, layer + plane, head_max.begin());
    for (std::size_t h = 1; h < attn.heads(); ++h) {
      const float* head = layer + h * plane;
      for (std::size_t t = 0; t < plane; ++t) head_max[t] = std::max(head_max[t], head[t]);
    }
    auto acc = out.values();
    for (std::size_t t = 0; t < plane; ++t) acc[t] += static_cast<double>(head_max[t]);
  }
  return out;
}

AttnStack apply_mask(const AttnStack& attn, const TokenMask& mask) {
  if (!mask.same_shape(attn.grid_h(), attn.grid_w())) {
    throw ValidationError("mask shape does not match attention grid");
  }
  std::vector<float> vals(attn.values().begin(), attn.values().end());
  const std::size_t plane = attn.grid_h() * attn.grid_w();
  const auto m = mask.values();
  for (std::size_t base = 0; base < vals.size(); base += plane) {
    for (std::size_t t = 0; t < plane; ++t) {
      if (m[t] == 0) vals[base + t] = 0.0f;
    }
  }
  return AttnStack(attn.shape(), std::move(vals));
}

std::vector<TokenCoord> cluster_high_group(const TokenHeatmap& heat, const TokenMask& mask) {
  if (!mask.same_shape(heat)) throw ValidationError("mask shape does not match heatmap");

  std::vector<std::size_t> live;
  live.reserve(heat.size());
  const auto m = mask.values();
  const auto v = heat.values();
  for (std::size_t t = 0; t < v.size(); ++t) {
    if (m[t] != 0) live.push_back(t);
  }
  if (live.empty()) throw EmptyDomainError("no attendable tokens to cluster");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t t : live) {
    lo = std::min(lo, v[t]);
    hi = std::max(hi, v[t]);
  }
  if (lo == hi) return {};

  std::vector<std::uint8_t> high(live.size(), 0);
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    bool changed = iter == 0;
    double sum_hi = 0.0, sum_lo = 0.0;
    std::size_t n_hi = 0;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const double x = v[live[i]];
      const std::uint8_t a = std::abs(x - hi) <= std::abs(x - lo) ? 1 : 0;
      changed = changed || a != high[i];
      high[i] = a;
      if (a) {
        sum_hi += x;
        ++n_hi;
      } else {
        sum_lo += x;
      }
    }
    if (!changed) break;
    const std::size_t n_lo = live.size() - n_hi;
    // Extreme-point init keeps both groups nonempty; guard anyway.
    if (n_hi == 0 || n_lo == 0) break;
    hi = sum_hi / static_cast<double>(n_hi);
    lo = sum_lo / static_cast<double>(n_lo);
  }

  std::vector<TokenCoord> out;
  for (std::size_t i = 0; i < live.size(); ++i) {
    if (high[i]) out.push_back({live[i] / heat.cols(), live[i] % heat.cols()});
  }
  return out;
}

}  // namespace pmag

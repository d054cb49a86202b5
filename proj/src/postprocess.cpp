#include "pmag/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmag/errors.hpp"

namespace pmag {

namespace {

void check_finite(const Grid2<double>& g, const char* what) {
  if (g.empty()) throw ValidationError(std::string(what) + ": empty map");
  for (double v : g.values()) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite value");
  }
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Largest open-interval range that survives conversion to float.
constexpr double kPerceptionFloor = std::numeric_limits<float>::min();
constexpr double kPerceptionCeil = 1.0 - 0x1p-24;

}  // namespace

void PostprocessConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be > 0");
  if (kernel < 1 || kernel % 2 == 0) throw ValidationError("kernel size must be odd and >= 1");
  if (out_h == 0 || out_w == 0) throw ValidationError("output dimensions must be >= 1");
}

TokenHeatmap normalize_unit(const TokenHeatmap& heat) {
  check_finite(heat, "normalize_unit");
  const auto [lo_it, hi_it] = std::minmax_element(heat.values().begin(), heat.values().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  TokenHeatmap out(heat.rows(), heat.cols(), 0.5);
  if (hi > lo) {
    const double span = hi - lo;
    auto dst = out.values();
    const auto src = heat.values();
    for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = (src[t] - lo) / span;
  }
  return out;
}

TokenHeatmap sigmoid_enhance(const TokenHeatmap& heat, double alpha) {
  check_finite(heat, "sigmoid_enhance");
  const auto src = heat.values();
  TokenHeatmap out(heat.rows(), heat.cols(), 0.5);
  // Exact test: rounding in the mean gives constant maps a spurious nonzero sigma.
  const auto [lo, hi] = std::minmax_element(src.begin(), src.end());
  if (*lo == *hi) return out;

  const double n = static_cast<double>(src.size());
  double mean = 0.0;
  for (double v : src) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : src) var += (v - mean) * (v - mean);
  const double sigma = std::sqrt(var / n);

  if (sigma > 0.0) {
    auto dst = out.values();
    for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = logistic(alpha * ((src[t] - mean) / sigma));
  }
  return out;
}

TokenHeatmap smooth_uniform(const TokenHeatmap& heat, std::size_t k) {
  if (k < 1 || k % 2 == 0) throw ValidationError("kernel size must be odd and >= 1");
  check_finite(heat, "smooth_uniform");
  if (k == 1) return heat;

  const auto rows = static_cast<std::ptrdiff_t>(heat.rows());
  const auto cols = static_cast<std::ptrdiff_t>(heat.cols());
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  const double area = static_cast<double>(k * k);
  TokenHeatmap out(heat.rows(), heat.cols(), 0.0);
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double sum = 0.0;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::ptrdiff_t dr = -half; dr <= half; ++dr) {
        const auto rr = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(r + dr, 0, rows - 1));
        for (std::ptrdiff_t dc = -half; dc <= half; ++dc) {
          const auto cc = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(c + dc, 0, cols - 1));
          const double v = heat(rr, cc);
          sum += v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      // Rounding in the sum can push the mean one ulp outside the window.
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = std::clamp(sum / area, lo, hi);
    }
  }
  return out;
}

double sample_bilinear(const Grid2<double>& grid, double row, double col) {
  const double max_r = static_cast<double>(grid.rows() - 1);
  const double max_c = static_cast<double>(grid.cols() - 1);
  row = std::clamp(row, 0.0, max_r);
  col = std::clamp(col, 0.0, max_c);
  const auto r0 = static_cast<std::size_t>(row);
  const auto c0 = static_cast<std::size_t>(col);
  const std::size_t r1 = std::min(r0 + 1, grid.rows() - 1);
  const std::size_t c1 = std::min(c0 + 1, grid.cols() - 1);
  const double fr = row - static_cast<double>(r0);
  const double fc = col - static_cast<double>(c0);
  const double top = grid(r0, c0) + fc * (grid(r0, c1) - grid(r0, c0));
  const double bot = grid(r1, c0) + fc * (grid(r1, c1) - grid(r1, c0));
  return top + fr * (bot - top);
}

PerceptionMap upsample_bilinear(const TokenHeatmap& heat, std::size_t out_h, std::size_t out_w) {
  check_finite(heat, "upsample_bilinear");
  if (out_h < heat.rows() || out_w < heat.cols()) {
    throw ValidationError("upsample target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                          " is smaller than the " + std::to_string(heat.rows()) + "x" +
                          std::to_string(heat.cols()) + " source");
  }
  const double sy = static_cast<double>(heat.rows()) / static_cast<double>(out_h);
  const double sx = static_cast<double>(heat.cols()) / static_cast<double>(out_w);
  PerceptionMap out(out_h, out_w, 0.0);
  for (std::size_t i = 0; i < out_h; ++i) {
    const double y = (static_cast<double>(i) + 0.5) * sy - 0.5;
    for (std::size_t j = 0; j < out_w; ++j) {
      const double x = (static_cast<double>(j) + 0.5) * sx - 0.5;
      out(i, j) = sample_bilinear(heat, y, x);
    }
  }
  return out;
}

PerceptionMap postprocess_pipeline(const TokenHeatmap& heat, const PostprocessConfig& cfg) {
  cfg.validate();
  TokenHeatmap enhanced = sigmoid_enhance(normalize_unit(heat), cfg.alpha);
  for (double& v : enhanced.values()) v = std::clamp(v, kPerceptionFloor, kPerceptionCeil);
  return upsample_bilinear(smooth_uniform(enhanced, cfg.kernel), cfg.out_h, cfg.out_w);
}

}  // namespace pmag

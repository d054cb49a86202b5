#pragma once

// Reference implementations used only by tests. Each one is written the
// slow, obvious way and must stay independent of the library code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include "pmag/attention_map.hpp"
#include "pmag/grid.hpp"

namespace pmag::oracle {

/// Heatmap as literal nested loops: for each token, sum over layers of the
/// head maximum.
inline std::vector<double> aggregate_nested(const AttnStack& attn, std::size_t start) {
  std::vector<double> out(attn.grid_h() * attn.grid_w(), 0.0);
  for (std::size_t l = start; l < attn.layers(); ++l) {
    for (std::size_t y = 0; y < attn.grid_h(); ++y) {
      for (std::size_t x = 0; x < attn.grid_w(); ++x) {
        float m = attn.at(l, 0, y, x);
        for (std::size_t h = 1; h < attn.heads(); ++h) m = std::max(m, attn.at(l, h, y, x));
        out[y * attn.grid_w() + x] += static_cast<double>(m);
      }
    }
  }
  return out;
}

/// Minimum within-group sum of squares over every split into two nonempty
/// groups. Returns the membership of the group with the larger mean.
inline std::vector<bool> best_two_partition(const std::vector<double>& v) {
  const std::size_t n = v.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> best_hi(n, false);
  for (std::size_t bits = 1; bits + 1 < (std::size_t{1} << n); ++bits) {
    double s1 = 0, s0 = 0;
    std::size_t n1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (bits >> i & 1) { s1 += v[i]; ++n1; } else { s0 += v[i]; }
    }
    const double m1 = s1 / n1, m0 = s0 / (n - n1);
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = v[i] - ((bits >> i & 1) ? m1 : m0);
      sse += d * d;
    }
    if (sse < best - 1e-15) {
      best = sse;
      for (std::size_t i = 0; i < n; ++i) best_hi[i] = ((bits >> i & 1) != 0) == (m1 > m0);
    }
  }
  return best_hi;
}

/// Piecewise-linear cdf inverse by scanning cells from the left.
inline double invert_linear_scan(const std::vector<double>& mass, const std::vector<double>& cum,
                                 double target) {
  for (std::size_t j = 1; j < cum.size(); ++j) {
    if (cum[j] >= target) {
      const double f = (target - cum[j - 1]) / mass[j - 1];
      return static_cast<double>(j - 1) + std::clamp(f, 0.0, 1.0);
    }
  }
  return static_cast<double>(mass.size());
}

/// Box mean over an explicitly replicate-padded copy of the grid.
inline Grid2<double> box_filter_padded(const Grid2<double>& g, std::size_t k) {
  const std::size_t half = k / 2;
  const std::size_t ph = g.rows() + 2 * half, pw = g.cols() + 2 * half;
  Grid2<double> padded(ph, pw, 0.0);
  for (std::size_t r = 0; r < ph; ++r) {
    for (std::size_t c = 0; c < pw; ++c) {
      const auto sr = std::clamp<long>(static_cast<long>(r) - static_cast<long>(half), 0, static_cast<long>(g.rows()) - 1);
      const auto sc = std::clamp<long>(static_cast<long>(c) - static_cast<long>(half), 0, static_cast<long>(g.cols()) - 1);
      padded(r, c) = g(sr, sc);
    }
  }
  Grid2<double> out(g.rows(), g.cols(), 0.0);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      double s = 0;
      for (std::size_t dr = 0; dr < k; ++dr)
        for (std::size_t dc = 0; dc < k; ++dc) s += padded(r + dr, c + dc);
      out(r, c) = s / static_cast<double>(k * k);
    }
  }
  return out;
}

/// Half-pixel bilinear resize written with explicit corner weights.
inline Grid2<double> upsample_scalar(const Grid2<double>& g, std::size_t oh, std::size_t ow) {
  Grid2<double> out(oh, ow, 0.0);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double y = (i + 0.5) * g.rows() / static_cast<double>(oh) - 0.5;
      double x = (j + 0.5) * g.cols() / static_cast<double>(ow) - 0.5;
      y = std::clamp(y, 0.0, g.rows() - 1.0);
      x = std::clamp(x, 0.0, g.cols() - 1.0);
      const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
      const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t y1 = std::min(y0 + 1, g.rows() - 1), x1 = std::min(x0 + 1, g.cols() - 1);
      const double wy = y - y0, wx = x - x0;
      out(i, j) = (1 - wy) * (1 - wx) * g(y0, x0) + (1 - wy) * wx * g(y0, x1) +
                  wy * (1 - wx) * g(y1, x0) + wy * wx * g(y1, x1);
    }
  }
  return out;
}

/// Population z-score followed by the logistic function, in long double.
inline std::vector<double> zscore_sigmoid(const std::vector<double>& v, double alpha) {
  long double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  long double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  const long double sd = std::sqrt(var / v.size());
  std::vector<double> out;
  for (double x : v) {
    out.push_back(sd == 0 ? 0.5 : static_cast<double>(1.0L / (1.0L + std::exp(-alpha * (x - mean) / sd))));
  }
  return out;
}

inline AttnStack random_stack(std::mt19937_64& rng, StackShape s) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(s.elements());
  for (auto& x : v) x = u(rng);
  return AttnStack(s, std::move(v));
}

inline Grid2<double> random_grid(std::mt19937_64& rng, std::size_t h, std::size_t w, double lo,
                                 double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Grid2<double> g(h, w, 0.0);
  for (auto& x : g.values()) x = u(rng);
  return g;
}

}  // namespace pmag::oracle

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "pmag/grid.hpp"
#include "pmag/image.hpp"

namespace pmag {

enum class Axis { X, Y };

/// Cumulative mass along one image axis. `cumulative` has one more entry
/// than `mass`, starting at 0; cell j spans source coordinates [j, j+1).
struct MarginalCdf {
  Axis axis = Axis::X;
  std::vector<double> mass;
  std::vector<double> cumulative;

  std::size_t length() const noexcept { return mass.size(); }
  double total() const noexcept { return cumulative.back(); }
};

/// Column maxima drive the x marginal, row maxima the y marginal.
/// Throws ValidationError if any marginal mass is not strictly positive.
std::pair<MarginalCdf, MarginalCdf> build_marginal_cdfs(const PerceptionMap& pmap);

/// Builds a cdf from explicit masses (all > 0).
MarginalCdf make_cdf(Axis axis, std::vector<double> mass);

/// Rescales masses by the peak mass and rounds the ratios to single
/// precision. For maps with single-precision values this makes the warp
/// geometry exactly invariant to a uniform rescaling of the map.
MarginalCdf normalize_to_peak(const MarginalCdf& cdf);

/// Piecewise-linear inverse: a mass coordinate in [0, total] maps to a
/// continuous source coordinate in [0, length]. Binary search.
/// Throws RangeError outside [0, total].
double invert_cdf(const MarginalCdf& cdf, double target);

/// Source coordinates (pixel-center convention) for every output column and row.
struct RemapGrid {
  std::vector<double> src_x;
  std::vector<double> src_y;

  friend bool operator==(const RemapGrid&, const RemapGrid&) = default;
};

/// Output pixel j reads the cdf inverse at mass ((j + 0.5) / out_w) * total,
/// shifted by -0.5 to pixel centers. Uses the peak-normalized marginals.
RemapGrid compute_remap(const PerceptionMap& pmap, std::size_t out_h, std::size_t out_w);

/// Clamp-to-edge bilinear read of one channel.
double sample_image(const ImageBuffer& image, double row, double col, std::size_t channel);

/// Resamples `image` so that rows and columns with more perception mass
/// cover more output pixels. `pmap` must match the image size.
ImageBuffer magnify(const ImageBuffer& image, const PerceptionMap& pmap, std::size_t out_h,
                    std::size_t out_w);
ImageBuffer magnify(const ImageBuffer& image, const PerceptionMap& pmap);

}  // namespace pmag

#include <algorithm>
#include <cmath>

#include "pmag/errors.hpp"
#include "pmag/io_formats.hpp"
#include "pmag/postprocess.hpp"

namespace pmag {

namespace {

constexpr std::array<Rgb8, 256> kViridis = {{
#include "viridis_lut.inc"
}};

const Rgb8& lookup(double v) {
  return kViridis[static_cast<std::size_t>(std::floor(v * 255.0 + 0.5))];
}

void check_unit(const Grid2<double>& map) {
  if (map.empty()) throw ValidationError("cannot render an empty map");
  for (double v : map.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("render expects map values in [0, 1]");
  }
}

}  // namespace

const std::array<Rgb8, 256>& colormap_lut() { return kViridis; }

ImageBuffer render_heat(const Grid2<double>& map) {
  check_unit(map);
  ImageBuffer out(map.rows(), map.cols(), 3);
  for (std::size_t r = 0; r < map.rows(); ++r) {
    for (std::size_t c = 0; c < map.cols(); ++c) {
      const Rgb8& rgb = lookup(map(r, c));
      for (std::size_t k = 0; k < 3; ++k) out(r, c, k) = rgb[k] / 255.0;
    }
  }
  return out;
}

ImageBuffer render_heat(const Grid2<double>& map, const ImageBuffer& overlay, double blend) {
  if (!(blend >= 0.0 && blend <= 1.0)) throw ValidationError("blend must lie in [0, 1]");
  check_unit(map);
  if (map.rows() > overlay.height() || map.cols() > overlay.width()) {
    throw ValidationError("map is larger than the overlay image");
  }
  TokenHeatmap src(map.rows(), map.cols(), map.storage());
  const Grid2<double> scaled = upsample_bilinear(src, overlay.height(), overlay.width());

  ImageBuffer out(overlay.height(), overlay.width(), 3);
  for (std::size_t r = 0; r < out.height(); ++r) {
    for (std::size_t c = 0; c < out.width(); ++c) {
      const Rgb8& rgb = lookup(scaled(r, c));
      for (std::size_t k = 0; k < 3; ++k) {
        const double base = overlay(r, c, overlay.channels() == 3 ? k : 0);
        out(r, c, k) = std::min(1.0, (1.0 - blend) * base + blend * (rgb[k] / 255.0));
      }
    }
  }
  return out;
}

}  // namespace pmag

#include "pmag/magnifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pmag/errors.hpp"

namespace pmag {

MarginalCdf make_cdf(Axis axis, std::vector<double> mass) {
  if (mass.empty()) throw ValidationError("marginal needs at least one cell");
  MarginalCdf cdf;
  cdf.axis = axis;
  cdf.cumulative.reserve(mass.size() + 1);
  cdf.cumulative.push_back(0.0);
  double run = 0.0;
  for (double m : mass) {
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw ValidationError("marginal mass must be finite and > 0");
    }
    run += m;
    cdf.cumulative.push_back(run);
  }
  cdf.mass = std::move(mass);
  return cdf;
}

std::pair<MarginalCdf, MarginalCdf> build_marginal_cdfs(const PerceptionMap& pmap) {
  if (pmap.empty()) throw ValidationError("perception map is empty");
  std::vector<double> col_max(pmap.cols(), -std::numeric_limits<double>::infinity());
  std::vector<double> row_max(pmap.rows(), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < pmap.rows(); ++r) {
    for (std::size_t c = 0; c < pmap.cols(); ++c) {
      const double v = pmap(r, c);
      col_max[c] = std::max(col_max[c], v);
      row_max[r] = std::max(row_max[r], v);
    }
  }
  return {make_cdf(Axis::X, std::move(col_max)), make_cdf(Axis::Y, std::move(row_max))};
}

MarginalCdf normalize_to_peak(const MarginalCdf& cdf) {
  const double peak = *std::max_element(cdf.mass.begin(), cdf.mass.end());
  std::vector<double> mass(cdf.mass.size());
  for (std::size_t j = 0; j < mass.size(); ++j) {
    mass[j] = static_cast<double>(static_cast<float>(cdf.mass[j] / peak));
  }
  return make_cdf(cdf.axis, std::move(mass));
}

double invert_cdf(const MarginalCdf& cdf, double target) {
  const double total = cdf.total();
  if (!(target >= 0.0 && target <= total)) {
    throw RangeError("cdf target " + std::to_string(target) + " outside [0, " +
                     std::to_string(total) + "]");
  }
  // First cell whose upper cumulative bound reaches the target.
  const auto it = std::lower_bound(cdf.cumulative.begin() + 1, cdf.cumulative.end(), target);
  const auto cell = static_cast<std::size_t>(it - cdf.cumulative.begin()) - 1;
  const double frac = (target - cdf.cumulative[cell]) / cdf.mass[cell];
  return static_cast<double>(cell) + std::clamp(frac, 0.0, 1.0);
}

RemapGrid compute_remap(const PerceptionMap& pmap, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ValidationError("output dimensions must be >= 1");
  const auto [raw_x, raw_y] = build_marginal_cdfs(pmap);
  const MarginalCdf fx = normalize_to_peak(raw_x);
  const MarginalCdf fy = normalize_to_peak(raw_y);

  RemapGrid grid;
  grid.src_x.resize(out_w);
  grid.src_y.resize(out_h);
  for (std::size_t j = 0; j < out_w; ++j) {
    const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(out_w) * fx.total();
    grid.src_x[j] = invert_cdf(fx, u) - 0.5;
  }
  for (std::size_t i = 0; i < out_h; ++i) {
    const double v = (static_cast<double>(i) + 0.5) / static_cast<double>(out_h) * fy.total();
    grid.src_y[i] = invert_cdf(fy, v) - 0.5;
  }
  return grid;
}

double sample_image(const ImageBuffer& image, double row, double col, std::size_t channel) {
  row = std::clamp(row, 0.0, static_cast<double>(image.height() - 1));
  col = std::clamp(col, 0.0, static_cast<double>(image.width() - 1));
  const auto r0 = static_cast<std::size_t>(row);
  const auto c0 = static_cast<std::size_t>(col);
  const std::size_t r1 = std::min(r0 + 1, image.height() - 1);
  const std::size_t c1 = std::min(c0 + 1, image.width() - 1);
  const double fr = row - static_cast<double>(r0);
  const double fc = col - static_cast<double>(c0);
  const double a = image(r0, c0, channel);
  const double b = image(r0, c1, channel);
  const double c = image(r1, c0, channel);
  const double d = image(r1, c1, channel);
  const double top = (1.0 - fc) * a + fc * b;
  const double bot = (1.0 - fc) * c + fc * d;
  // Convex weights can round a hair outside the neighbourhood range.
  return std::clamp((1.0 - fr) * top + fr * bot, std::min({a, b, c, d}), std::max({a, b, c, d}));
}

ImageBuffer magnify(const ImageBuffer& image, const PerceptionMap& pmap, std::size_t out_h,
                    std::size_t out_w) {
  if (!pmap.same_shape(image.height(), image.width())) {
    throw ValidationError("perception map is " + std::to_string(pmap.rows()) + "x" +
                          std::to_string(pmap.cols()) + " but image is " +
                          std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  const RemapGrid remap = compute_remap(pmap, out_h, out_w);
  const std::size_t ch = image.channels();
  ImageBuffer out(out_h, out_w, ch);
  for (std::size_t i = 0; i < out_h; ++i) {
    for (std::size_t j = 0; j < out_w; ++j) {
      for (std::size_t c = 0; c < ch; ++c) {
        out(i, j, c) = sample_image(image, remap.src_y[i], remap.src_x[j], c);
      }
    }
  }
  return out;
}

ImageBuffer magnify(const ImageBuffer& image, const PerceptionMap& pmap) {
  return magnify(image, pmap, image.height(), image.width());
}

}  // namespace pmag

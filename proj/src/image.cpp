#include "pmag/image.hpp"

#include <string>

#include "pmag/errors.hpp"

namespace pmag {

namespace {

void check_dims(std::size_t h, std::size_t w, std::size_t c) {
  if (h == 0 || w == 0) throw ValidationError("image dimensions must be >= 1");
  if (c != 1 && c != 3) {
    throw ValidationError("image must have 1 or 3 channels, got " + std::to_string(c));
  }
}

}  // namespace

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels), pixels_(height * width * channels, fill) {
  check_dims(height, width, channels);
}

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<double> pixels)
    : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
  check_dims(height, width, channels);
  if (pixels_.size() != height * width * channels) {
    throw ValidationError("image buffer size does not match its dimensions");
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("image values must lie in [0, 1]");
  }
}

}  // namespace pmag

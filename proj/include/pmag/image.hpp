#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pmag {

/// Interleaved [row][col][channel] image with values in [0, 1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  /// Throws ValidationError on bad dims, size mismatch, or values outside [0, 1].
  ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> pixels);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }

  double operator()(std::size_t row, std::size_t col, std::size_t ch) const {
    return pixels_[(row * width_ + col) * channels_ + ch];
  }
  double& operator()(std::size_t row, std::size_t col, std::size_t ch) {
    return pixels_[(row * width_ + col) * channels_ + ch];
  }

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> pixels_;
};

}  // namespace pmag

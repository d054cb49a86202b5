#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace pmag {

/// Dense row-major 2-D grid.
template <typename T>
class Grid2 {
 public:
  using value_type = T;

  Grid2() = default;
  Grid2(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Grid2(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    assert(data_.size() == rows_ * cols_);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_shape(std::size_t rows, std::size_t cols) const noexcept {
    return rows_ == rows && cols_ == cols;
  }
  template <typename U>
  bool same_shape(const Grid2<U>& other) const noexcept {
    return same_shape(other.rows(), other.cols());
  }

  friend bool operator==(const Grid2&, const Grid2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Aggregated attention mass per visual token.
struct TokenHeatmap : Grid2<double> {
  using Grid2<double>::Grid2;
};

/// Pixel-resolution map with every value in (0, 1).
struct PerceptionMap : Grid2<double> {
  using Grid2<double>::Grid2;
};

/// Attend-ability per token; nonzero means the token may receive attention.
struct TokenMask : Grid2<std::uint8_t> {
  using Grid2<std::uint8_t>::Grid2;

  static TokenMask all(std::size_t rows, std::size_t cols, bool attendable = true) {
    return TokenMask(rows, cols, static_cast<std::uint8_t>(attendable ? 1 : 0));
  }
  bool attendable(std::size_t r, std::size_t c) const { return (*this)(r, c) != 0; }
  std::size_t count_attendable() const {
    std::size_t n = 0;
    for (auto v : values()) n += v != 0;
    return n;
  }
};

/// Number of refinement passes in which each token was attendable.
struct CountMask : Grid2<std::uint32_t> {
  using Grid2<std::uint32_t>::Grid2;
};

struct TokenCoord {
  std::size_t row = 0;
  std::size_t col = 0;
  friend auto operator<=>(const TokenCoord&, const TokenCoord&) = default;
};

}  // namespace pmag

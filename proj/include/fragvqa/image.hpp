#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fragvqa/errors.hpp"

namespace fragvqa {

inline constexpr int kChannels = 3;

// Row-major interleaved RGB24 image.
class Image {
 public:
  Image() = default;

  Image(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw ShapeError("image dimensions must be positive, got " +
                       std::to_string(width) + "x" + std::to_string(height));
    }
    data_.assign(sample_count(), fill);
  }

  Image(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
      throw ShapeError("image dimensions must be positive, got " +
                       std::to_string(width) + "x" + std::to_string(height));
    }
    if (data_.size() != sample_count()) {
      throw ShapeError("pixel buffer holds " + std::to_string(data_.size()) +
                       " samples, expected " + std::to_string(sample_count()));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t sample_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_) * kChannels;
  }
  std::size_t row_stride() const noexcept {
    return static_cast<std::size_t>(width_) * kChannels;
  }
  std::size_t offset(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * row_stride() + static_cast<std::size_t>(x) * kChannels;
  }

  std::uint8_t at(int x, int y, int c) const noexcept { return data_[offset(x, y) + c]; }
  std::uint8_t& at(int x, int y, int c) noexcept { return data_[offset(x, y) + c]; }

  std::span<const std::uint8_t> pixels() const noexcept { return data_; }
  std::span<std::uint8_t> pixels() noexcept { return data_; }
  std::span<const std::uint8_t> row(int y) const noexcept {
    return std::span<const std::uint8_t>(data_).subspan(static_cast<std::size_t>(y) * row_stride(),
                                                        row_stride());
  }
  std::span<std::uint8_t> row(int y) noexcept {
    return std::span<std::uint8_t>(data_).subspan(static_cast<std::size_t>(y) * row_stride(),
                                                  row_stride());
  }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// One decoded picture and its position in the stream.
struct Frame {
  std::int64_t index = 0;
  Image image;

  int width() const noexcept { return image.width(); }
  int height() const noexcept { return image.height(); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

}  // namespace fragvqa

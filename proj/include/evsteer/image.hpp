#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace evsteer {

/// Row-major single-channel image of doubles.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
  }

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const noexcept { return values.size(); }
  bool same_shape(const Image& other) const noexcept {
    return width == other.width && height == other.height;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace evsteer

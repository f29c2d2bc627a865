#pragma once

#include <cstdint>
#include <vector>

#include "splatrack/errors.hpp"

namespace splatrack {

/// Float image: per-pixel RGB in [0,1] plus accumulated opacity in [0,1].
struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;    // 3 * width * height, interleaved r,g,b
  std::vector<double> alpha;  // width * height

  RenderedImage() = default;
  RenderedImage(int w, int h)
      : width(w), height(h), rgb(3 * static_cast<std::size_t>(w) * h, 0.0),
        alpha(static_cast<std::size_t>(w) * h, 0.0) {}

  std::size_t pixel_index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  double* rgb_at(int x, int y) { return &rgb[3 * pixel_index(x, y)]; }
  const double* rgb_at(int x, int y) const { return &rgb[3 * pixel_index(x, y)]; }
  double& alpha_at(int x, int y) { return alpha[pixel_index(x, y)]; }
  double alpha_at(int x, int y) const { return alpha[pixel_index(x, y)]; }

  bool same_size(const RenderedImage& other) const {
    return width == other.width && height == other.height;
  }
};

/// Binary silhouette mask.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 0 background, 1 foreground

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  std::size_t foreground_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += (v != 0);
    return n;
  }
};

/// Silhouette of a render: pixels whose accumulated opacity exceeds 0.5.
inline Mask silhouette_from_alpha(const RenderedImage& image, double threshold = 0.5) {
  Mask mask(image.width, image.height);
  for (std::size_t i = 0; i < image.alpha.size(); ++i) {
    mask.data[i] = image.alpha[i] > threshold ? 1 : 0;
  }
  return mask;
}

}  // namespace splatrack

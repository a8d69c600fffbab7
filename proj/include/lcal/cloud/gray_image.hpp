#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <lcal/error.hpp>

namespace lcal {

/// Row-major grayscale image with intensities in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int width, int height, double value = 0.0) : width(width), height(height), pixels(static_cast<std::size_t>(width) * height, value) {}

  double& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  double at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }

  bool empty() const { return pixels.empty(); }

  void validate() const {
    if (width < 0 || height < 0 || pixels.size() != static_cast<std::size_t>(width) * height) {
      throw ArgumentError("image pixel count does not match width x height");
    }
  }
};

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major 8-bit RGB image.
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  ColorImage() = default;
  ColorImage(int width, int height, Rgb value = {0, 0, 0}) : width(width), height(height), pixels(static_cast<std::size_t>(width) * height, value) {}

  Rgb& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  const Rgb& at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }

  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
};

}  // namespace lcal

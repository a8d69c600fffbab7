#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include <lcal/cloud/gray_image.hpp>
#include <lcal/cloud/point_cloud.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/geom/rigid_transform.hpp>
#include <lcal/init/correspondences.hpp>
#include <lcal/nid/hidden_point_removal.hpp>

namespace lcal {

inline constexpr Rgb kInlierColor{0, 220, 0};
inline constexpr Rgb kOutlierColor{230, 0, 0};

/// Blue-cyan-yellow-red ramp for intensities in [0, 1].
inline Rgb jet(double value) {
  const double x = std::clamp(value, 0.0, 1.0);
  auto channel = [x](double center) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(1.5 - 4.0 * std::abs(x - center), 0.0, 1.0))); };
  return {channel(0.75), channel(0.5), channel(0.25)};
}

inline ColorImage to_color(const GrayImage& image) {
  ColorImage out(image.width, image.height);
  for (std::size_t k = 0; k < image.pixels.size(); k++) {
    const auto g = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(image.pixels[k], 0.0, 1.0)));
    out.pixels[k] = {g, g, g};
  }
  return out;
}

/// Camera image in grayscale with the points visible at T drawn as colormapped dots.
inline ColorImage render_overlay(const PointCloud& cloud, const GrayImage& image, const CameraModel& cam, const RigidTransform& T_camera_lidar, int dot_radius = 0) {
  ColorImage out = to_color(image);
  if (cloud.empty()) return out;
  for (const auto j : hidden_point_removal(cloud, cam, T_camera_lidar)) {
    const auto x = project(cam, T_camera_lidar * cloud.points[j]);
    if (!x || !in_image(cam, *x)) continue;
    const int u0 = static_cast<int>(std::floor(x->x())), v0 = static_cast<int>(std::floor(x->y()));
    for (int dv = -dot_radius; dv <= dot_radius; dv++) {
      for (int du = -dot_radius; du <= dot_radius; du++) {
        if (out.contains(u0 + du, v0 + dv)) out.at(u0 + du, v0 + dv) = jet(cloud.intensities[j]);
      }
    }
  }
  return out;
}

/// Mean |l_j - I(x_j)| over the points visible at T that land in the image; NaN when none does.
inline double overlay_intensity_error(const PointCloud& cloud, const GrayImage& image, const CameraModel& cam, const RigidTransform& T_camera_lidar) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto j : hidden_point_removal(cloud, cam, T_camera_lidar)) {
    const auto pixel = project_to_pixel_index(cam, T_camera_lidar * cloud.points[j]);
    if (!pixel) continue;
    sum += std::abs(cloud.intensities[j] - image.pixels[*pixel]);
    n++;
  }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

inline void draw_line(ColorImage& image, Eigen::Vector2i a, Eigen::Vector2i b, Rgb color) {
  // Bresenham
  const int dx = std::abs(b.x() - a.x()), dy = -std::abs(b.y() - a.y());
  const int sx = a.x() < b.x() ? 1 : -1, sy = a.y() < b.y() ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (image.contains(a.x(), a.y())) image.at(a.x(), a.y()) = color;
    if (a == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      a.x() += sx;
    }
    if (e2 <= dx) {
      err += dx;
      a.y() += sy;
    }
  }
}

/// Camera image (left) beside the LiDAR intensity image (right), with a line per match that
/// carries its LiDAR-image pixel: green for RANSAC inliers, red for outliers.
inline ColorImage render_matches(const GrayImage& camera_image, const GrayImage& lidar_image, const CorrespondenceSet& corr, const std::vector<bool>& inliers) {
  ColorImage out(camera_image.width + lidar_image.width, std::max(camera_image.height, lidar_image.height));
  for (int v = 0; v < camera_image.height; v++) {
    for (int u = 0; u < camera_image.width; u++) {
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(camera_image.at(u, v), 0.0, 1.0)));
      out.at(u, v) = {g, g, g};
    }
  }
  for (int v = 0; v < lidar_image.height; v++) {
    for (int u = 0; u < lidar_image.width; u++) {
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(lidar_image.at(u, v), 0.0, 1.0)));
      out.at(camera_image.width + u, v) = {g, g, g};
    }
  }
  for (std::size_t k = 0; k < corr.size(); k++) {
    const auto& c = corr.pairs[k];
    if (!c.lidar_pixel) continue;
    const Eigen::Vector2i a(static_cast<int>(std::floor(c.pixel.x())), static_cast<int>(std::floor(c.pixel.y())));
    const Eigen::Vector2i b(camera_image.width + static_cast<int>(std::floor(c.lidar_pixel->x())), static_cast<int>(std::floor(c.lidar_pixel->y())));
    draw_line(out, a, b, k < inliers.size() && inliers[k] ? kInlierColor : kOutlierColor);
  }
  return out;
}

}  // namespace lcal

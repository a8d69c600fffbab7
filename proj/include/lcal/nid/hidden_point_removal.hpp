#pragma once

#include <limits>
#include <vector>

#include <lcal/cloud/point_cloud.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/geom/rigid_transform.hpp>

namespace lcal {

/// Depth-buffer visibility: projects every point at the camera's native resolution and keeps,
/// per pixel, the point with the minimum range. Equal ranges keep the lower index.
/// Returns the retained indices in ascending order.
inline std::vector<std::size_t> hidden_point_removal(const PointCloud& cloud, const CameraModel& cam, const RigidTransform& T_camera_lidar) {
  const std::size_t num_pixels = static_cast<std::size_t>(image_width(cam)) * image_height(cam);
  std::vector<double> depth(num_pixels, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> winner(num_pixels, -1);

  const Eigen::Matrix3d R = T_camera_lidar.rotation_matrix();
  const Eigen::Vector3d t = T_camera_lidar.translation();
  for (std::size_t i = 0; i < cloud.size(); i++) {
    const Eigen::Vector3d p_cam = R * cloud.points[i] + t;
    const auto pixel = project_to_pixel_index(cam, p_cam);
    if (!pixel) {
      continue;
    }
    const double range = p_cam.norm();
    if (range < depth[*pixel]) {
      depth[*pixel] = range;
      winner[*pixel] = static_cast<std::int64_t>(i);
    }
  }

  std::vector<char> keep(cloud.size(), 0);
  for (const auto w : winner) {
    if (w >= 0) {
      keep[w] = 1;
    }
  }
  std::vector<std::size_t> visible;
  for (std::size_t i = 0; i < keep.size(); i++) {
    if (keep[i]) {
      visible.push_back(i);
    }
  }
  return visible;
}

}  // namespace lcal

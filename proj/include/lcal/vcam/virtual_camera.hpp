#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <lcal/cloud/gray_image.hpp>
#include <lcal/cloud/point_cloud.hpp>
#include <lcal/error.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/geom/camera_io.hpp>
#include <lcal/geom/rigid_transform.hpp>
#include <lcal/geom/transform_io.hpp>

namespace lcal {

struct VirtualCameraParams {
  int pinhole_size = 1024;
  int equirect_width = 1920;
  double fov_margin = 1.05;
  double equirect_threshold_deg = 150.0;  ///< fov at or above this selects the equirectangular model
};

/// Camera used to render the LiDAR cloud, with its pose relative to the LiDAR.
struct VirtualCamera {
  CameraModel model;
  RigidTransform T_camera_lidar;
};

/// Camera-style axes for a given LiDAR-frame viewing direction: z along forward, y as close to
/// LiDAR -z (down) as possible. Returned as the rotation taking LiDAR coordinates to camera ones.
inline Eigen::Matrix3d look_rotation(const Eigen::Vector3d& forward) {
  const Eigen::Vector3d z = forward.normalized();
  Eigen::Vector3d down(0.0, 0.0, -1.0);
  if (std::abs(z.dot(down)) > 0.999) {
    down = Eigen::Vector3d(-1.0, 0.0, 0.0);
  }
  const Eigen::Vector3d x = down.cross(z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R_lidar_camera;
  R_lidar_camera << x, y, z;
  return R_lidar_camera.transpose();
}

inline VirtualCamera select_virtual_camera(double fov_deg, const PointCloud& cloud, const VirtualCameraParams& params = {}) {
  if (!(fov_deg > 0.0 && fov_deg <= 180.0)) {
    throw ArgumentError("FoV must lie in (0, 180] degrees, got " + std::to_string(fov_deg));
  }

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) {
    const double n = p.norm();
    if (n > 0.0) mean += p / n;
  }
  if (!(mean.norm() > 1e-9)) {
    mean = Eigen::Vector3d::UnitX();
  }

  VirtualCamera vc;
  if (fov_deg >= params.equirect_threshold_deg) {
    vc.model = EquirectCamera{params.equirect_width, params.equirect_width / 2};
    vc.T_camera_lidar = RigidTransform(look_rotation(Eigen::Vector3d::UnitX()), Eigen::Vector3d::Zero());
    return vc;
  }

  const double half = params.pinhole_size / 2.0;
  const double half_diagonal = std::sqrt(2.0) * half;
  const double half_angle = std::min(deg2rad(fov_deg * params.fov_margin) / 2.0, deg2rad(89.0));
  PinholeCamera pinhole;
  pinhole.fx = pinhole.fy = half_diagonal / std::tan(half_angle);
  pinhole.cx = pinhole.cy = half;
  pinhole.width = pinhole.height = params.pinhole_size;
  vc.model = pinhole;
  vc.T_camera_lidar = RigidTransform(look_rotation(mean), Eigen::Vector3d::Zero());
  return vc;
}

inline nlohmann::json virtual_camera_to_json(const VirtualCamera& vc) {
  return {{"camera", camera_to_json(vc.model)}, {"T_camera_lidar", transform_to_json(vc.T_camera_lidar)}};
}

inline VirtualCamera virtual_camera_from_json(const nlohmann::json& j) {
  if (!j.contains("camera") || !j.contains("T_camera_lidar")) {
    throw FormatError("virtual camera JSON needs \"camera\" and \"T_camera_lidar\"");
  }
  return {camera_from_json(j.at("camera")), transform_from_json(j.at("T_camera_lidar"))};
}

/// Per-pixel index of the rendered point, -1 where nothing was rendered.
struct IndexMap {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> indices;

  IndexMap() = default;
  IndexMap(int width, int height) : width(width), height(height), indices(static_cast<std::size_t>(width) * height, -1) {}

  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }

  std::optional<std::size_t> at(int u, int v) const {
    if (!contains(u, v)) return std::nullopt;
    const std::int32_t index = indices[static_cast<std::size_t>(v) * width + u];
    if (index < 0) return std::nullopt;
    return static_cast<std::size_t>(index);
  }

  /// Nearest non-empty entry in the 3x3 window around (u, v); the center wins, then the
  /// closest neighbor, ties broken in row-major order.
  std::optional<std::size_t> lookup_window(int u, int v) const {
    std::optional<std::size_t> best;
    int best_d2 = std::numeric_limits<int>::max();
    for (int dv = -1; dv <= 1; dv++) {
      for (int du = -1; du <= 1; du++) {
        const auto index = at(u + du, v + dv);
        const int d2 = du * du + dv * dv;
        if (index && d2 < best_d2) {
          best = index;
          best_d2 = d2;
        }
      }
    }
    return best;
  }
};

struct RenderResult {
  GrayImage image;
  IndexMap index_map;
};

/// Splats each point into the single pixel containing its projection. Per pixel the point with
/// the smallest camera-frame range wins; exact ties keep the lower index. No hole filling.
inline RenderResult render_intensity(const PointCloud& cloud, const VirtualCamera& vc) {
  const int width = image_width(vc.model);
  const int height = image_height(vc.model);
  if (cloud.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw ArgumentError("cloud too large for a 32-bit index map");
  }

  RenderResult out{GrayImage(width, height), IndexMap(width, height)};
  std::vector<double> depth(static_cast<std::size_t>(width) * height, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < cloud.size(); i++) {
    const Eigen::Vector3d p_cam = vc.T_camera_lidar * cloud.points[i];
    const auto pixel = project_to_pixel_index(vc.model, p_cam);
    if (!pixel) continue;
    const double range = p_cam.norm();
    if (range < depth[*pixel]) {
      depth[*pixel] = range;
      out.index_map.indices[*pixel] = static_cast<std::int32_t>(i);
      out.image.pixels[*pixel] = cloud.intensities[i];
    }
  }
  return out;
}

namespace index_map_detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff), static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char bytes[4];
  if (!is.read(reinterpret_cast<char*>(bytes), 4)) {
    throw FormatError("index map truncated");
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) | (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace index_map_detail

/// Binary layout: width, height as u32 LE, then one i32 LE index per pixel in row-major order.
inline void write_index_map(const std::string& path, const IndexMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("failed to open " + path + " for writing");
  index_map_detail::put_u32(os, static_cast<std::uint32_t>(map.width));
  index_map_detail::put_u32(os, static_cast<std::uint32_t>(map.height));
  for (const std::int32_t index : map.indices) {
    index_map_detail::put_u32(os, static_cast<std::uint32_t>(index));
  }
  if (!os) throw IoError("failed to write " + path);
}

inline IndexMap load_index_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("failed to open index map " + path);
  const std::uint32_t width = index_map_detail::get_u32(is);
  const std::uint32_t height = index_map_detail::get_u32(is);
  if (width > 1u << 16 || height > 1u << 16) {
    throw FormatError("index map " + path + " has implausible size " + std::to_string(width) + "x" + std::to_string(height));
  }
  IndexMap map(static_cast<int>(width), static_cast<int>(height));
  for (auto& index : map.indices) {
    index = static_cast<std::int32_t>(index_map_detail::get_u32(is));
    if (index < -1) throw FormatError("index map " + path + " holds a negative index other than -1");
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("index map " + path + " has trailing bytes");
  }
  return map;
}

}  // namespace lcal

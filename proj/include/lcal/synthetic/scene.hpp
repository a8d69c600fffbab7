#pragma once

// Procedural scenes with known ground truth: an axis-aligned room with solid box
// obstacles, a deterministic 3D texture, LiDAR samplers and a camera renderer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <lcal/cloud/gray_image.hpp>
#include <lcal/cloud/point_cloud.hpp>
#include <lcal/dynamic/ct_icp.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/geom/rigid_transform.hpp>

namespace lcal::synthetic {

struct Box {
  Eigen::Vector3d min;
  Eigen::Vector3d max;

  bool contains(const Eigen::Vector3d& p, double eps = 0.0) const { return (p.array() >= min.array() - eps).all() && (p.array() <= max.array() + eps).all(); }
};

/// Room interior plus solid obstacles, all axis-aligned in the world (= LiDAR) frame.
/// World axes: x forward, y left, z up.
class Scene {
public:
  Box room;
  std::vector<Box> obstacles;

  /// Distance along a unit ray to the first surface, if any.
  std::optional<double> raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
    double best = std::numeric_limits<double>::infinity();
    if (room.contains(origin)) {
      for (int k = 0; k < 3; k++) {
        if (dir[k] > 1e-12) best = std::min(best, (room.max[k] - origin[k]) / dir[k]);
        if (dir[k] < -1e-12) best = std::min(best, (room.min[k] - origin[k]) / dir[k]);
      }
    }
    for (const auto& box : obstacles) {
      double t_near = -std::numeric_limits<double>::infinity();
      double t_far = std::numeric_limits<double>::infinity();
      bool miss = false;
      for (int k = 0; k < 3; k++) {
        if (std::abs(dir[k]) < 1e-12) {
          if (origin[k] < box.min[k] || origin[k] > box.max[k]) miss = true;
          continue;
        }
        double t0 = (box.min[k] - origin[k]) / dir[k];
        double t1 = (box.max[k] - origin[k]) / dir[k];
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
      }
      if (!miss && t_near <= t_far && t_near > 1e-9) {
        best = std::min(best, t_near);
      }
    }
    if (!std::isfinite(best) || best <= 0.0) {
      return std::nullopt;
    }
    return best;
  }

  /// Distance from p to the nearest scene surface.
  double distance_to_surface(const Eigen::Vector3d& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; k++) {
      best = std::min({best, std::abs(p[k] - room.min[k]), std::abs(p[k] - room.max[k])});
    }
    for (const auto& box : obstacles) {
      const Eigen::Vector3d outside = (box.min - p).cwiseMax(p - box.max).cwiseMax(0.0);
      if (outside.squaredNorm() > 0.0) {
        best = std::min(best, outside.norm());
      } else {
        const Eigen::Vector3d inside = (p - box.min).cwiseMin(box.max - p);
        best = std::min(best, inside.minCoeff());
      }
    }
    return best;
  }

  /// Deterministic multi-scale value-noise texture in [0, 1].
  static double texture(const Eigen::Vector3d& p) {
    const double v = 0.5 * value_noise(p / 1.1) + 0.3 * value_noise(p / 0.45 + Eigen::Vector3d(17.3, 5.1, 2.9)) + 0.2 * value_noise(p / 0.18 + Eigen::Vector3d(3.7, 11.2, 7.5));
    return std::clamp(v, 0.0, 1.0);
  }

private:
  static double lattice(std::int64_t x, std::int64_t y, std::int64_t z) {
    std::uint64_t h = static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint64_t>(y) * 0xC2B2AE3D27D4EB4Full ^ static_cast<std::uint64_t>(z) * 0x165667B19E3779F9ull;
    h ^= h >> 31;
    h *= 0xD6E8FEB86659FD93ull;
    h ^= h >> 32;
    return static_cast<double>(h >> 11) / static_cast<double>(1ull << 53);
  }

  static double value_noise(const Eigen::Vector3d& p) {
    const Eigen::Vector3d f = p.array().floor();
    const Eigen::Vector3d r = p - f;
    const Eigen::Vector3d s = r.array().square() * (3.0 - 2.0 * r.array());
    const auto xi = static_cast<std::int64_t>(f.x());
    const auto yi = static_cast<std::int64_t>(f.y());
    const auto zi = static_cast<std::int64_t>(f.z());
    double v = 0.0;
    for (int dz = 0; dz < 2; dz++) {
      for (int dy = 0; dy < 2; dy++) {
        for (int dx = 0; dx < 2; dx++) {
          const double w = (dx ? s.x() : 1.0 - s.x()) * (dy ? s.y() : 1.0 - s.y()) * (dz ? s.z() : 1.0 - s.z());
          v += w * lattice(xi + dx, yi + dy, zi + dz);
        }
      }
    }
    return v;
  }
};

/// Room of about 10 x 8 x 4 m around the origin with a pillar and two pieces of furniture.
inline Scene make_room_scene(bool with_pillar = true) {
  Scene scene;
  scene.room = {Eigen::Vector3d(-4.0, -4.0, -1.5), Eigen::Vector3d(6.0, 4.0, 2.5)};
  if (with_pillar) {
    scene.obstacles.push_back({Eigen::Vector3d(2.0, -0.5, -1.5), Eigen::Vector3d(2.4, -0.1, 2.5)});
  }
  scene.obstacles.push_back({Eigen::Vector3d(3.2, 1.0, -1.5), Eigen::Vector3d(4.2, 2.2, -0.7)});
  scene.obstacles.push_back({Eigen::Vector3d(4.6, -3.2, -1.5), Eigen::Vector3d(5.6, -2.0, 0.6)});
  scene.obstacles.push_back({Eigen::Vector3d(-2.5, 2.8, -1.5), Eigen::Vector3d(-1.0, 4.0, 1.0)});
  return scene;
}

/// Rotation taking LiDAR-convention axes (x forward, y left, z up) to camera axes (z forward, x right, y down).
inline Eigen::Matrix3d lidar_to_camera_axes() {
  Eigen::Matrix3d R;
  R << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  return R;
}

/// A representative LiDAR-camera extrinsic: small offsets on top of the axis convention change.
inline RigidTransform ground_truth_extrinsic() {
  const Eigen::Matrix3d extra = (Eigen::AngleAxisd(deg2rad(2.0), Eigen::Vector3d::UnitX()) * Eigen::AngleAxisd(deg2rad(-3.0), Eigen::Vector3d::UnitY()) *
                                 Eigen::AngleAxisd(deg2rad(1.5), Eigen::Vector3d::UnitZ()))
                                  .toRotationMatrix();
  return RigidTransform(Eigen::Matrix3d(extra * lidar_to_camera_axes()), Eigen::Vector3d(0.12, -0.08, 0.05));
}

/// Samples a cloud by casting rays from `origin` (world frame) in random directions drawn from `direction`.
/// Returned points are in the sensor frame located at `sensor_pose` (sensor -> world).
template <typename DirectionSampler>
PointCloud sample_lidar(const Scene& scene, const RigidTransform& sensor_pose, std::size_t num_points, DirectionSampler&& direction, std::mt19937& mt) {
  PointCloud cloud;
  cloud.points.reserve(num_points);
  cloud.intensities.reserve(num_points);
  const RigidTransform world_to_sensor = sensor_pose.inverse();
  std::size_t attempts = 0;
  while (cloud.size() < num_points && attempts < num_points * 10) {
    attempts++;
    const Eigen::Vector3d dir_sensor = direction(mt);
    const Eigen::Vector3d dir_world = sensor_pose.rotation() * dir_sensor;
    const auto hit = scene.raycast(sensor_pose.translation(), dir_world);
    if (!hit) {
      continue;
    }
    const Eigen::Vector3d world = sensor_pose.translation() + *hit * dir_world;
    cloud.push_back(world_to_sensor * world, Scene::texture(world));
  }
  return cloud;
}

/// Uniform directions within a cone of the given half-angle around +x.
inline auto cone_directions(double half_angle) {
  return [half_angle](std::mt19937& mt) {
    std::uniform_real_distribution<> udist(0.0, 1.0);
    const double cos_max = std::cos(half_angle);
    const double c = 1.0 - udist(mt) * (1.0 - cos_max);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double phi = 2.0 * M_PI * udist(mt);
    return Eigen::Vector3d(c, s * std::cos(phi), s * std::sin(phi));
  };
}

/// Uniform directions over the full azimuth with elevation in [-max_elevation, max_elevation].
inline auto band_directions(double max_elevation) {
  return [max_elevation](std::mt19937& mt) {
    std::uniform_real_distribution<> udist(0.0, 1.0);
    const double z = (2.0 * udist(mt) - 1.0) * std::sin(max_elevation);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = 2.0 * M_PI * udist(mt);
    return Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z);
  };
}

/// Renders the camera image of the scene: T_camera_lidar is the extrinsic, the LiDAR sits at the
/// world origin. Texture values go through a monotone remap followed by Gaussian noise.
inline GrayImage render_camera(const Scene& scene, const CameraModel& cam, const RigidTransform& T_camera_lidar, double noise_sigma, std::uint32_t seed) {
  const RigidTransform T_lidar_camera = T_camera_lidar.inverse();
  const Eigen::Vector3d origin = T_lidar_camera.translation();
  std::mt19937 mt(seed);
  std::normal_distribution<> ndist(0.0, noise_sigma);

  GrayImage image(image_width(cam), image_height(cam));
  for (int v = 0; v < image.height; v++) {
    for (int u = 0; u < image.width; u++) {
      const Eigen::Vector3d dir = T_lidar_camera.rotation() * unproject(cam, Eigen::Vector2d(u + 0.5, v + 0.5)).vec();
      const auto hit = scene.raycast(origin, dir);
      double value = 0.0;
      if (hit) {
        const double t = Scene::texture(origin + *hit * dir);
        value = 0.1 + 0.85 * std::pow(t, 1.6);
      }
      image.at(u, v) = std::clamp(value + ndist(mt), 0.0, 1.0);
    }
  }
  return image;
}

/// True when the segment from `eye` to `p` is not blocked by any surface closer than `p`.
inline bool visible_from(const Scene& scene, const Eigen::Vector3d& eye, const Eigen::Vector3d& p, double tolerance = 1e-6) {
  const Eigen::Vector3d diff = p - eye;
  const double dist = diff.norm();
  const auto hit = scene.raycast(eye, diff / dist);
  return hit && *hit >= dist - tolerance;
}

/// Spinning LiDAR: azimuth sweeps [0, 2 pi) over normalized time [0, 1] on `rings` beams
/// spanning [-max_elevation, max_elevation]. The sensor moves along `motion` during the scan and
/// the returned points are expressed in the sensor frame at each point's capture time.
inline PointCloud spinning_scan(const Scene& scene, const ScanPosePair& motion, int rings, int columns, double max_elevation) {
  PointCloud scan;
  for (int c = 0; c < columns; c++) {
    const double time = static_cast<double>(c) / (columns - 1);
    const double azimuth = 2.0 * M_PI * c / columns;
    const RigidTransform pose = interpolate_pose(motion, time);
    const RigidTransform world_to_sensor = pose.inverse();
    for (int r = 0; r < rings; r++) {
      const double elevation = -max_elevation + 2.0 * max_elevation * r / (rings - 1);
      const Eigen::Vector3d dir_sensor(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
      const Eigen::Vector3d dir_world = pose.rotation() * dir_sensor;
      const auto hit = scene.raycast(pose.translation(), dir_world);
      if (!hit) {
        continue;
      }
      const Eigen::Vector3d world = pose.translation() + *hit * dir_world;
      scan.push_back(world_to_sensor * world, Scene::texture(world), time);
    }
  }
  return scan;
}

/// Scan sequence with ground truth. The first scan is static at the origin (it defines the map
/// frame); every later scan k moves with constant body-frame velocity from step^(k-1) to step^k.
struct ScanSequence {
  std::vector<PointCloud> scans;
  std::vector<ScanPosePair> poses;
};

inline ScanSequence constant_velocity_sequence(const Scene& scene, int num_scans, const RigidTransform& step, int rings, int columns, double max_elevation) {
  ScanSequence seq;
  RigidTransform begin = RigidTransform::identity();
  for (int k = 0; k < num_scans; k++) {
    const ScanPosePair poses = k == 0 ? ScanPosePair{} : ScanPosePair{begin, begin * step};
    if (k > 0) begin = poses.end;
    seq.scans.push_back(spinning_scan(scene, poses, rings, columns, max_elevation));
    seq.poses.push_back(poses);
  }
  return seq;
}

}  // namespace lcal::synthetic

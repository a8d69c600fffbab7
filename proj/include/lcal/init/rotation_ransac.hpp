#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include <lcal/error.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/init/correspondences.hpp>

namespace lcal {

/// Least-squares rotation R minimizing sum |c_i - R l_i|^2 for two bearing pairs (Umeyama).
inline Eigen::Matrix3d rotation_from_two(const Bearing& c0, const Bearing& c1, const Bearing& l0, const Bearing& l1) {
  constexpr double kMinAngle = 1e-4;
  if (l0.angle_to(l1) <= kMinAngle || c0.angle_to(c1) <= kMinAngle) {
    throw DegenerateSampleError("bearing pair is (nearly) parallel");
  }
  const Eigen::Matrix3d M = c0.vec() * l0.vec().transpose() + c1.vec() * l1.vec().transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s = (svd.matrixU().determinant() * svd.matrixV().determinant()) < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * Eigen::Vector3d(1.0, 1.0, s).asDiagonal() * svd.matrixV().transpose();
}

struct RansacParams {
  int iterations = 10000;
  double pixel_threshold = 20.0;    ///< pinhole inlier threshold [px]
  double angular_threshold = 0.02;  ///< equirectangular inlier threshold [rad]
  std::uint64_t seed = 0;
  std::size_t min_confident_inliers = 5;

  double threshold_for(const CameraModel& cam) const { return is_equirectangular(cam) ? angular_threshold : pixel_threshold; }

  void validate() const {
    if (iterations < 1) throw ArgumentError("RANSAC needs at least one iteration");
    if (!(pixel_threshold > 0.0) || !(angular_threshold > 0.0)) throw ArgumentError("RANSAC thresholds must be positive");
  }
};

struct RansacResult {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  std::vector<bool> inliers;
  std::size_t num_inliers = 0;
  int best_iteration = -1;
  std::vector<std::string> warnings;
};

/// splitmix64 finalizer: a cheap bijective mix used to derive per-iteration random streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Whether pair j is explained by rotation R (zero translation).
inline bool rotation_inlier(const CameraModel& cam, const Eigen::Matrix3d& R, const Correspondence& c, const Eigen::Vector3d& camera_bearing, double threshold) {
  const Eigen::Vector3d rotated = R * c.point;
  if (is_equirectangular(cam)) {
    const double n = rotated.norm();
    if (!(n > 0.0)) return false;
    const Eigen::Vector3d b = rotated / n;
    return std::atan2(b.cross(camera_bearing).norm(), b.dot(camera_bearing)) < threshold;
  }
  const auto projected = project(cam, rotated);
  return projected && (*projected - c.pixel).norm() < threshold;
}

/// Rotation-only RANSAC. Iteration i draws its two pairs from a stream seeded by (seed, i), so
/// the result does not depend on evaluation order; ties keep the lowest iteration.
inline RansacResult ransac_rotation(const CorrespondenceSet& corr, const CameraModel& cam, const RansacParams& params = {}) {
  params.validate();
  const std::size_t n = corr.size();
  if (n < 2) {
    throw InsufficientCorrespondencesError("rotation RANSAC needs at least 2 correspondences, got " + std::to_string(n));
  }

  std::vector<Bearing> camera_bearings;
  std::vector<Bearing> lidar_bearings;
  camera_bearings.reserve(n);
  lidar_bearings.reserve(n);
  for (const auto& c : corr.pairs) {
    camera_bearings.push_back(unproject(cam, c.pixel));
    lidar_bearings.emplace_back(c.point);
  }

  const double threshold = params.threshold_for(cam);
  RansacResult best;
  std::vector<bool> mask(n);
  for (int iter = 0; iter < params.iterations; iter++) {
    const std::uint64_t stream = splitmix64(params.seed ^ splitmix64(static_cast<std::uint64_t>(iter)));
    const std::size_t a = splitmix64(stream) % n;
    std::size_t b = splitmix64(stream + 1) % (n - 1);
    if (b >= a) b++;

    Eigen::Matrix3d R;
    try {
      R = rotation_from_two(camera_bearings[a], camera_bearings[b], lidar_bearings[a], lidar_bearings[b]);
    } catch (const DegenerateSampleError&) {
      continue;
    }

    std::size_t count = 0;
    for (std::size_t j = 0; j < n; j++) {
      mask[j] = rotation_inlier(cam, R, corr.pairs[j], camera_bearings[j].vec(), threshold);
      count += mask[j];
    }
    if (best.best_iteration < 0 || count > best.num_inliers) {
      best.rotation = R;
      best.inliers = mask;
      best.num_inliers = count;
      best.best_iteration = iter;
    }
  }

  if (best.best_iteration < 0) {
    best.inliers.assign(n, false);
    best.warnings.push_back("every RANSAC sample was degenerate; rotation left at identity");
  }
  if (best.num_inliers < params.min_confident_inliers) {
    best.warnings.push_back("low confidence: only " + std::to_string(best.num_inliers) + " RANSAC inliers");
  }
  return best;
}

}  // namespace lcal

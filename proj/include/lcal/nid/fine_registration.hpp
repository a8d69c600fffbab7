#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <lcal/cloud/gray_image.hpp>
#include <lcal/cloud/point_cloud.hpp>
#include <lcal/error.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/geom/rigid_transform.hpp>
#include <lcal/nid/hidden_point_removal.hpp>
#include <lcal/nid/histograms.hpp>
#include <lcal/optim/nelder_mead.hpp>

namespace lcal {

/// One calibration data pairing: a (densified) point cloud and the camera image taken with it.
struct LidarCameraPair {
  PointCloud cloud;
  GrayImage image;
};

struct FineRegistrationParams {
  int bins = 16;
  NelderMeadParams nelder_mead;
  int max_outer_iterations = 10;
  double translation_tolerance = 1e-4;           ///< [m]
  double rotation_tolerance = deg2rad(0.005);    ///< [rad]
};

struct FineRegistrationResult {
  RigidTransform T_camera_lidar;
  double initial_nid = 0.0;  ///< summed NID at T0
  double final_nid = 0.0;    ///< summed NID at the returned transform
  int outer_iterations = 0;
  int pairs_used = 0;
  std::vector<std::string> warnings;
};

/// Summed NID over pairs, with hidden points removed at the evaluated transform.
/// Pairs without overlap contribute nothing and are reported through `overlapping`.
inline double summed_nid(std::span<const LidarCameraPair> pairs, const CameraModel& cam, const RigidTransform& T_camera_lidar, int bins, int* overlapping = nullptr) {
  double sum = 0.0;
  int count = 0;
  for (const auto& pair : pairs) {
    const auto visible = hidden_point_removal(pair.cloud, cam, T_camera_lidar);
    try {
      sum += nid(build_histograms(pair.cloud, visible, pair.image, cam, T_camera_lidar, bins));
      count++;
    } catch (const NoOverlapError&) {
    }
  }
  if (overlapping) {
    *overlapping = count;
  }
  return sum;
}

/// NID-based fine registration.
///
/// Alternates depth-buffer hidden point removal at the current estimate with Nelder-Mead
/// minimization of the summed per-pair NID over a 6-vector [translation, rotation vector]
/// perturbation applied on the left of the current estimate. Stops when an update is below
/// the translation/rotation tolerances or after max_outer_iterations.
/// The returned transform is the visited estimate with the lowest summed NID.
inline FineRegistrationResult calibrate_fine(std::span<const LidarCameraPair> pairs, const CameraModel& cam, const RigidTransform& T0, const FineRegistrationParams& params = {}) {
  if (pairs.empty()) {
    throw ArgumentError("fine registration requires at least one data pair");
  }
  for (const auto& pair : pairs) {
    pair.cloud.validate();
    pair.image.validate();
    if (pair.image.width != image_width(cam) || pair.image.height != image_height(cam)) {
      throw ArgumentError("camera image size does not match the camera model");
    }
  }

  FineRegistrationResult result;
  RigidTransform current = T0;
  double current_value = std::numeric_limits<double>::infinity();

  RigidTransform best = T0;
  double best_value = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < params.max_outer_iterations; outer++) {
    struct ActivePair {
      const LidarCameraPair* pair;
      std::vector<std::size_t> visible;
    };
    std::vector<ActivePair> active;
    current_value = 0.0;
    for (std::size_t k = 0; k < pairs.size(); k++) {
      auto visible = hidden_point_removal(pairs[k].cloud, cam, current);
      try {
        current_value += nid(build_histograms(pairs[k].cloud, visible, pairs[k].image, cam, current, params.bins));
        active.push_back({&pairs[k], std::move(visible)});
      } catch (const NoOverlapError&) {
        result.warnings.push_back("outer iteration " + std::to_string(outer) + ": pair " + std::to_string(k) + " has no overlap and is skipped");
      }
    }
    if (active.empty()) {
      throw CalibrationFailedError("no data pair overlaps the camera image at the current estimate");
    }

    if (outer == 0) {
      result.initial_nid = current_value;
    }
    if (current_value < best_value || outer == 0) {
      best = current;
      best_value = current_value;
      result.pairs_used = static_cast<int>(active.size());
    }

    const auto objective = [&](const Eigen::VectorXd& delta) {
      const RigidTransform T = current.perturbed(Vector6d(delta));
      double sum = 0.0;
      for (const auto& a : active) {
        try {
          sum += nid(build_histograms(a.pair->cloud, a.visible, a.pair->image, cam, T, params.bins));
        } catch (const NoOverlapError&) {
          return std::numeric_limits<double>::infinity();
        }
      }
      return sum;
    };

    const auto minimized = nelder_mead(objective, Eigen::VectorXd::Zero(6), params.nelder_mead);
    result.outer_iterations = outer + 1;

    const Vector6d delta = minimized.x;
    current = current.perturbed(delta);

    const double translation_step = delta.head<3>().norm();
    const double rotation_step = delta.tail<3>().norm();
    if (translation_step < params.translation_tolerance && rotation_step < params.rotation_tolerance) {
      break;
    }
  }

  // the last update has not been scored with its own visibility yet
  int overlapping = 0;
  const double last_value = summed_nid(pairs, cam, current, params.bins, &overlapping);
  if (overlapping > 0 && last_value < best_value) {
    best = current;
    best_value = last_value;
    result.pairs_used = overlapping;
  }

  result.T_camera_lidar = best;
  result.final_nid = best_value;
  return result;
}

}  // namespace lcal

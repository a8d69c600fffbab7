#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <lcal/cloud/point_cloud.hpp>
#include <lcal/dynamic/linear_ivox.hpp>
#include <lcal/error.hpp>
#include <lcal/geom/rigid_transform.hpp>
#include <lcal/vcam/quickhull.hpp>

namespace lcal {

struct FovEstimate {
  double degrees = 0.0;
  std::size_t candidates = 0;  ///< bearings compared pairwise
  std::vector<std::string> warnings;
};

/// Largest angle between any two bearings, by brute force.
inline double max_pairwise_angle_deg(std::span<const Eigen::Vector3d> bearings) {
  double min_dot = 1.0;
  for (std::size_t i = 0; i < bearings.size(); i++) {
    for (std::size_t j = i + 1; j < bearings.size(); j++) {
      min_dot = std::min(min_dot, bearings[i].dot(bearings[j]));
    }
  }
  return rad2deg(std::acos(std::clamp(min_dot, -1.0, 1.0)));
}

inline std::vector<Eigen::Vector3d> bearings_of(const PointCloud& cloud, std::span<const std::size_t> indices) {
  std::vector<Eigen::Vector3d> bearings;
  bearings.reserve(indices.size());
  for (const std::size_t i : indices) {
    const double n = cloud.points[i].norm();
    if (n > 0.0) bearings.push_back(cloud.points[i] / n);
  }
  return bearings;
}

namespace fov_detail {

inline bool origin_inside(const ConvexHull& hull, std::span<const Eigen::Vector3d> points) {
  for (const auto& f : hull.faces) {
    const Eigen::Vector3d& a = points[f[0]];
    const Eigen::Vector3d n = (points[f[1]] - a).cross(points[f[2]] - a);
    if (n.dot(-a) > 0.0) return false;
  }
  return true;
}

// Widest pair among all bearings via nearest neighbours of the antipodes. Exact whenever the
// widest pair is within kChord of antipodal, which is the only case this is used for.
inline double antipodal_search_deg(std::span<const Eigen::Vector3d> bearings) {
  constexpr double kChord = 0.05;
  LinearIVox grid(IVoxParams{kChord, std::numeric_limits<int>::max(), 0.0});
  grid.insert(bearings);
  double min_chord = std::numeric_limits<double>::infinity();
  for (const auto& b : bearings) {
    const auto nn = grid.nearest(-b, 1);
    if (!nn.empty()) min_chord = std::min(min_chord, std::sqrt(nn.front().squared_distance));
  }
  if (!std::isfinite(min_chord)) return 0.0;
  return 180.0 - rad2deg(2.0 * std::asin(std::min(1.0, 0.5 * min_chord)));
}

}  // namespace fov_detail

/// Field of view of a cloud seen from the sensor origin: quickhull, then the widest pair of
/// hull-vertex bearings. When the sensor sits outside the cloud's hull, the origin joins the
/// hull so that every extreme viewing direction owns a vertex. When it sits inside, hull
/// vertices can miss a nearly antipodal pair, so an antipode neighbour search over all bearings
/// supplements them. A cloud without volume falls back to a seeded random subsample of at most
/// 1000 points, with a warning.
inline FovEstimate estimate_fov(const PointCloud& cloud, std::uint64_t seed = 0) {
  if (cloud.size() < 2) {
    throw ArgumentError("FoV estimation needs at least two points");
  }

  FovEstimate result;
  std::vector<std::size_t> candidates;
  bool surrounded = false;
  try {
    const ConvexHull hull = quickhull(cloud.points);
    surrounded = fov_detail::origin_inside(hull, cloud.points);
    if (surrounded) {
      candidates = hull.vertices;
    } else {
      std::vector<Eigen::Vector3d> with_origin = cloud.points;
      with_origin.push_back(Eigen::Vector3d::Zero());
      for (const auto v : quickhull(with_origin).vertices) {
        if (v < cloud.size()) candidates.push_back(v);
      }
    }
  } catch (const DegenerateHullError& e) {
    result.warnings.push_back(std::string("degenerate cloud for convex hull (") + e.what() + "); FoV from a random subsample");
    candidates.resize(cloud.size());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    if (candidates.size() > 1000) {
      std::mt19937_64 rng(seed);
      std::shuffle(candidates.begin(), candidates.end(), rng);
      candidates.resize(1000);
      std::sort(candidates.begin(), candidates.end());
    }
  }

  const auto bearings = bearings_of(cloud, candidates);
  if (bearings.size() < 2) {
    throw ArgumentError("FoV estimation needs at least two points away from the origin");
  }
  result.candidates = bearings.size();
  result.degrees = max_pairwise_angle_deg(bearings);
  if (surrounded) {
    std::vector<std::size_t> all(cloud.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    result.degrees = std::max(result.degrees, fov_detail::antipodal_search_deg(bearings_of(cloud, all)));
  }
  return result;
}

}  // namespace lcal

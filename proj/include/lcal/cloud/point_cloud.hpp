#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include <lcal/error.hpp>

namespace lcal {

/// LiDAR point cloud. Intensities are normalized to [0, 1]; times, when present, are
/// within-scan timestamps normalized to [0, 1].
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> intensities;
  std::optional<std::vector<double>> times;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_times() const { return times.has_value(); }

  void validate() const {
    if (intensities.size() != points.size() || (times && times->size() != points.size())) {
      throw ArgumentError("point cloud fields have mismatched lengths");
    }
  }

  void push_back(const Eigen::Vector3d& p, double intensity) {
    points.push_back(p);
    intensities.push_back(intensity);
  }

  void push_back(const Eigen::Vector3d& p, double intensity, double time) {
    push_back(p, intensity);
    if (!times) {
      times.emplace(points.size() - 1, 0.0);
    }
    times->push_back(time);
  }
};

/// Concatenates scans into one cloud. Per-scan intensities are kept as they are; times are dropped.
inline PointCloud accumulate_static(const std::vector<PointCloud>& scans) {
  if (scans.empty()) {
    throw ArgumentError("accumulate_static requires at least one scan");
  }

  PointCloud accumulated;
  std::size_t total = 0;
  for (const auto& scan : scans) {
    total += scan.size();
  }
  accumulated.points.reserve(total);
  accumulated.intensities.reserve(total);
  for (const auto& scan : scans) {
    scan.validate();
    accumulated.points.insert(accumulated.points.end(), scan.points.begin(), scan.points.end());
    accumulated.intensities.insert(accumulated.intensities.end(), scan.intensities.begin(), scan.intensities.end());
  }
  return accumulated;
}

}  // namespace lcal

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include <lcal/error.hpp>

namespace lcal {

struct IVoxParams {
  double voxel_size = 0.5;          ///< [m]
  int max_points_per_voxel = 20;
  double decimation_radius = 0.05;  ///< a point this close to a stored point is not inserted [m]
};

struct Neighbor {
  Eigen::Vector3d point;
  double squared_distance = 0.0;
};

/// Incremental voxel map keeping a flat, capped list of points per voxel ("linear iVox").
class LinearIVox {
public:
  explicit LinearIVox(const IVoxParams& params = {}) : params_(params) {
    if (!(params.voxel_size > 0.0) || params.max_points_per_voxel < 1 || params.decimation_radius < 0.0) {
      throw ArgumentError("invalid iVox parameters");
    }
  }

  const IVoxParams& params() const { return params_; }

  Eigen::Vector3i voxel_coord(const Eigen::Vector3d& p) const { return (p.array() / params_.voxel_size).floor().cast<int>(); }

  /// Appends p to its voxel unless the voxel is full or already holds a point within the decimation radius.
  /// Returns whether the point was stored.
  bool insert(const Eigen::Vector3d& p) {
    auto& voxel = voxels_[voxel_coord(p)];
    if (static_cast<int>(voxel.size()) >= params_.max_points_per_voxel) {
      return false;
    }
    const double r2 = params_.decimation_radius * params_.decimation_radius;
    for (const auto& q : voxel) {
      if ((q - p).squaredNorm() <= r2) {
        return false;
      }
    }
    voxel.push_back(p);
    num_points_++;
    return true;
  }

  void insert(std::span<const Eigen::Vector3d> points) {
    for (const auto& p : points) {
      insert(p);
    }
  }

  /// Exact k nearest neighbors among the points stored in the query's voxel and its 26 neighbors,
  /// sorted by distance. Empty when that neighborhood holds no point.
  std::vector<Neighbor> nearest(const Eigen::Vector3d& query, int k) const {
    if (k < 1) {
      throw ArgumentError("k must be at least 1");
    }
    std::vector<Neighbor> found;
    const Eigen::Vector3i center = voxel_coord(query);
    for (int dz = -1; dz <= 1; dz++) {
      for (int dy = -1; dy <= 1; dy++) {
        for (int dx = -1; dx <= 1; dx++) {
          const auto found_voxel = voxels_.find(center + Eigen::Vector3i(dx, dy, dz));
          if (found_voxel == voxels_.end()) {
            continue;
          }
          for (const auto& p : found_voxel->second) {
            found.push_back({p, (p - query).squaredNorm()});
          }
        }
      }
    }

    const auto closer = [](const Neighbor& a, const Neighbor& b) { return a.squared_distance < b.squared_distance; };
    if (static_cast<int>(found.size()) > k) {
      std::partial_sort(found.begin(), found.begin() + k, found.end(), closer);
      found.resize(k);
    } else {
      std::sort(found.begin(), found.end(), closer);
    }
    return found;
  }

  std::size_t num_voxels() const { return voxels_.size(); }
  std::size_t num_points() const { return num_points_; }
  bool empty() const { return num_points_ == 0; }

  template <typename Fn>
  void for_each_voxel(Fn&& fn) const {
    for (const auto& [coord, points] : voxels_) {
      fn(coord, points);
    }
  }

private:
  struct VoxelHash {
    std::size_t operator()(const Eigen::Vector3i& v) const {
      return (static_cast<std::size_t>(static_cast<std::uint32_t>(v.x())) * 73856093u) ^ (static_cast<std::size_t>(static_cast<std::uint32_t>(v.y())) * 19349669u) ^
             (static_cast<std::size_t>(static_cast<std::uint32_t>(v.z())) * 83492791u);
    }
  };

  IVoxParams params_;
  std::unordered_map<Eigen::Vector3i, std::vector<Eigen::Vector3d>, VoxelHash> voxels_;
  std::size_t num_points_ = 0;
};

}  // namespace lcal

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <lcal/cloud/gray_image.hpp>
#include <lcal/cloud/point_cloud.hpp>
#include <lcal/error.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/geom/rigid_transform.hpp>

namespace lcal {

/// Joint and marginal histograms of (LiDAR intensity, pixel intensity) samples.
/// The joint table is row-major with rows indexed by the LiDAR bin.
struct IntensityHistograms {
  int bins = 0;
  std::vector<double> joint;
  std::vector<double> lidar;
  std::vector<double> image;
  double total = 0.0;

  IntensityHistograms() = default;
  explicit IntensityHistograms(int bins) : bins(bins), joint(static_cast<std::size_t>(bins) * bins, 0.0), lidar(bins, 0.0), image(bins, 0.0) {}

  /// Builds marginals and total from a joint table.
  static IntensityHistograms from_joint(int bins, std::vector<double> joint) {
    if (bins < 1 || joint.size() != static_cast<std::size_t>(bins) * bins) {
      throw ArgumentError("joint table size must be bins x bins");
    }
    IntensityHistograms hist(bins);
    hist.joint = std::move(joint);
    for (int l = 0; l < bins; l++) {
      for (int i = 0; i < bins; i++) {
        const double c = hist.joint[l * bins + i];
        hist.lidar[l] += c;
        hist.image[i] += c;
        hist.total += c;
      }
    }
    return hist;
  }

  void add(int lidar_bin, int image_bin, double count = 1.0) {
    joint[lidar_bin * bins + image_bin] += count;
    lidar[lidar_bin] += count;
    image[image_bin] += count;
    total += count;
  }

  double at(int lidar_bin, int image_bin) const { return joint[lidar_bin * bins + image_bin]; }

  /// Swaps the roles of the two channels.
  IntensityHistograms transposed() const {
    std::vector<double> t(joint.size());
    for (int l = 0; l < bins; l++) {
      for (int i = 0; i < bins; i++) {
        t[i * bins + l] = joint[l * bins + i];
      }
    }
    return from_joint(bins, std::move(t));
  }
};

inline int intensity_bin(double value, int bins) {
  const int bin = static_cast<int>(value * bins);
  return std::clamp(bin, 0, bins - 1);
}

/// Shannon entropy -sum p log p in nats over the nonzero bins (0 log 0 = 0).
inline double entropy(std::span<const double> counts) {
  double total = 0.0;
  for (const double c : counts) {
    total += c;
  }
  if (!(total > 0.0)) {
    throw DomainError("entropy of an empty histogram");
  }

  double h = 0.0;
  for (const double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

/// Normalized information distance (H(L,I) - MI(L;I)) / H(L,I) with MI = H(L) + H(I) - H(L,I).
/// Zero joint entropy (a single occupied cell) is defined as NID = 0.
inline double nid(const IntensityHistograms& hist) {
  const double h_joint = entropy(hist.joint);
  if (h_joint <= 0.0) {
    return 0.0;
  }
  const double h_lidar = entropy(hist.lidar);
  const double h_image = entropy(hist.image);
  const double mi = h_lidar + h_image - h_joint;
  return std::clamp((h_joint - mi) / h_joint, 0.0, 1.0);
}

/// Accumulates intensity histograms over the given visible points.
///
/// Each point is transformed by T_camera_lidar and projected; points outside the image are
/// skipped and the pixel intensity is read from the containing pixel.
/// Throws NoOverlapError when no point lands inside the image.
inline IntensityHistograms build_histograms(
  const PointCloud& cloud,
  std::span<const std::size_t> visible,
  const GrayImage& image,
  const CameraModel& cam,
  const RigidTransform& T_camera_lidar,
  int bins) {
  if (bins < 1) {
    throw ArgumentError("histogram bin count must be positive");
  }

  IntensityHistograms hist(bins);
  const Eigen::Matrix3d R = T_camera_lidar.rotation_matrix();
  const Eigen::Vector3d t = T_camera_lidar.translation();
  const int width = image_width(cam);
  for (const std::size_t index : visible) {
    const auto pixel = project_to_pixel_index(cam, R * cloud.points[index] + t);
    if (!pixel) {
      continue;
    }
    const int u = *pixel % width;
    const int v = *pixel / width;
    if (u >= image.width || v >= image.height) {
      continue;
    }
    hist.add(intensity_bin(cloud.intensities[index], bins), intensity_bin(image.at(u, v), bins));
  }

  if (hist.total == 0.0) {
    throw NoOverlapError("no LiDAR point projects into the camera image");
  }
  return hist;
}

}  // namespace lcal

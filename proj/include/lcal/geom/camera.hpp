#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <lcal/error.hpp>

namespace lcal {

/// Unit-norm direction vector.
class Bearing {
public:
  Bearing() : dir_(0.0, 0.0, 1.0) {}

  /// Normalizes v. Throws DomainError for (near) zero vectors.
  explicit Bearing(const Eigen::Vector3d& v) {
    const double n = v.norm();
    if (!(n > 1e-12) || !std::isfinite(n)) {
      throw DomainError("bearing of a zero-norm or non-finite vector");
    }
    dir_ = v / n;
  }

  const Eigen::Vector3d& vec() const { return dir_; }
  double x() const { return dir_.x(); }
  double y() const { return dir_.y(); }
  double z() const { return dir_.z(); }

  /// Angle to another bearing [rad], accurate for small angles.
  double angle_to(const Bearing& other) const { return std::atan2(dir_.cross(other.dir_).norm(), dir_.dot(other.dir_)); }

private:
  Eigen::Vector3d dir_;
};

/// Pinhole camera with plumb-bob (radial k1,k2,k3 + tangential p1,p2) distortion.
///
/// Pixel (i, j) covers the continuous square [i, i+1) x [j, j+1).
struct PinholeCamera {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double k3 = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || width <= 0 || height <= 0) {
      throw ArgumentError("pinhole camera requires fx > 0, fy > 0, width > 0, height > 0");
    }
  }

  bool has_distortion() const { return k1 != 0.0 || k2 != 0.0 || k3 != 0.0 || p1 != 0.0 || p2 != 0.0; }

  /// Applies the distortion polynomial to normalized coordinates.
  Eigen::Vector2d distort(const Eigen::Vector2d& n) const {
    const double x = n.x();
    const double y = n.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x), y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
  }

  /// d(r * radial(r)) / dr > 0, i.e. the radial map has not folded back yet.
  bool radially_monotone(double r2) const { return 1.0 + r2 * (3.0 * k1 + r2 * (5.0 * k2 + r2 * 7.0 * k3)) > 0.0; }
};

/// Equirectangular (longitude/latitude) omnidirectional camera.
///
/// Camera axes: z forward, x right, y down. Longitude is measured from +z toward +x,
/// latitude is positive upward (toward -y).
struct EquirectCamera {
  int width = 0;
  int height = 0;

  void validate() const {
    if (width <= 0 || height <= 0 || width != 2 * height) {
      throw ArgumentError("equirectangular camera requires width = 2 * height > 0");
    }
  }
};

using CameraModel = std::variant<PinholeCamera, EquirectCamera>;

inline constexpr double kBehindCameraZ = 1e-6;

/// Projects a camera-frame point. Returns nullopt for points with z <= 1e-6 (behind the camera)
/// and for points beyond the fold-back radius of the distortion polynomial.
inline std::optional<Eigen::Vector2d> pinhole_project(const PinholeCamera& cam, const Eigen::Vector3d& p_cam) {
  if (p_cam.z() <= kBehindCameraZ) {
    return std::nullopt;
  }
  const Eigen::Vector2d n(p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z());
  if (!cam.radially_monotone(n.squaredNorm())) {
    return std::nullopt;
  }
  const Eigen::Vector2d d = cam.distort(n);
  return Eigen::Vector2d(cam.fx * d.x() + cam.cx, cam.fy * d.y() + cam.cy);
}

/// Inverts the projection of a pixel. Distortion is removed with Newton iterations
/// (at most 20, tolerance 1e-10 in normalized coordinates).
inline Bearing pinhole_unproject(const PinholeCamera& cam, const Eigen::Vector2d& pixel) {
  const Eigen::Vector2d target((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy);
  if (!cam.has_distortion()) {
    return Bearing(Eigen::Vector3d(target.x(), target.y(), 1.0));
  }

  Eigen::Vector2d n = target;
  for (int i = 0; i < 20; i++) {
    const Eigen::Vector2d residual = cam.distort(n) - target;
    if (residual.norm() < 1e-10) {
      break;
    }

    const double x = n.x();
    const double y = n.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (cam.k1 + r2 * (cam.k2 + r2 * cam.k3));
    const double dradial = cam.k1 + r2 * (2.0 * cam.k2 + r2 * 3.0 * cam.k3);  // d radial / d r2
    Eigen::Matrix2d J;
    J(0, 0) = radial + 2.0 * x * x * dradial + 2.0 * cam.p1 * y + 6.0 * cam.p2 * x;
    J(0, 1) = 2.0 * x * y * dradial + 2.0 * cam.p1 * x + 2.0 * cam.p2 * y;
    J(1, 0) = 2.0 * x * y * dradial + 2.0 * cam.p1 * x + 2.0 * cam.p2 * y;
    J(1, 1) = radial + 2.0 * y * y * dradial + 6.0 * cam.p1 * y + 2.0 * cam.p2 * x;
    n -= J.inverse() * residual;
    if (!n.allFinite()) {
      break;
    }
  }

  // roots past the fold-back radius are not preimages of any projected point
  if (n.allFinite() && (cam.distort(n) - target).norm() < 1e-10 && cam.radially_monotone(n.squaredNorm())) {
    return Bearing(Eigen::Vector3d(n.x(), n.y(), 1.0));
  }

  std::ostringstream sst;
  sst << "distortion inversion did not converge for pixel (" << pixel.x() << ", " << pixel.y() << ")";
  throw NumericError(sst.str());
}

/// Projects a camera-frame point onto the equirectangular image. Throws DomainError for |p| = 0.
inline Eigen::Vector2d equirect_project(const EquirectCamera& cam, const Eigen::Vector3d& p_cam) {
  const double norm = p_cam.norm();
  if (!(norm > 0.0)) {
    throw DomainError("equirectangular projection of a zero-norm point");
  }
  const Eigen::Vector3d d = p_cam / norm;
  const double lon = std::atan2(d.x(), d.z());
  const double lat = std::asin(std::clamp(-d.y(), -1.0, 1.0));

  const double w = cam.width;
  const double h = cam.height;
  double u = (lon / (2.0 * M_PI) + 0.5) * w;
  double v = (0.5 - lat / M_PI) * h;
  // lon = +pi is the same meridian as lon = -pi
  if (u >= w) {
    u -= w;
  }
  if (v >= h) {
    v = std::nextafter(h, 0.0);
  }
  return {u, v};
}

inline Bearing equirect_unproject(const EquirectCamera& cam, const Eigen::Vector2d& pixel) {
  const double lon = (pixel.x() / cam.width - 0.5) * 2.0 * M_PI;
  const double lat = (0.5 - pixel.y() / cam.height) * M_PI;
  return Bearing(Eigen::Vector3d(std::cos(lat) * std::sin(lon), -std::sin(lat), std::cos(lat) * std::cos(lon)));
}

// CameraModel dispatch

inline int image_width(const CameraModel& cam) {
  return std::visit([](const auto& c) { return c.width; }, cam);
}

inline int image_height(const CameraModel& cam) {
  return std::visit([](const auto& c) { return c.height; }, cam);
}

inline bool is_equirectangular(const CameraModel& cam) {
  return std::holds_alternative<EquirectCamera>(cam);
}

inline void validate(const CameraModel& cam) {
  std::visit([](const auto& c) { c.validate(); }, cam);
}

/// Projection through the model interface. nullopt means the point must be skipped
/// (behind a pinhole camera, or the origin for the equirectangular model).
inline std::optional<Eigen::Vector2d> project(const CameraModel& cam, const Eigen::Vector3d& p_cam) {
  if (const auto* pinhole = std::get_if<PinholeCamera>(&cam)) {
    return pinhole_project(*pinhole, p_cam);
  }
  if (!(p_cam.squaredNorm() > 0.0)) {
    return std::nullopt;
  }
  return equirect_project(std::get<EquirectCamera>(cam), p_cam);
}

inline Bearing unproject(const CameraModel& cam, const Eigen::Vector2d& pixel) {
  if (const auto* pinhole = std::get_if<PinholeCamera>(&cam)) {
    return pinhole_unproject(*pinhole, pixel);
  }
  return equirect_unproject(std::get<EquirectCamera>(cam), pixel);
}

inline bool in_image(const CameraModel& cam, const Eigen::Vector2d& pixel) {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() < image_width(cam) && pixel.y() < image_height(cam);
}

/// Projects and returns the containing pixel index (row-major), or nullopt if outside the image.
inline std::optional<int> project_to_pixel_index(const CameraModel& cam, const Eigen::Vector3d& p_cam) {
  const auto pixel = project(cam, p_cam);
  if (!pixel || !in_image(cam, *pixel)) {
    return std::nullopt;
  }
  const int u = static_cast<int>(pixel->x());
  const int v = static_cast<int>(pixel->y());
  return v * image_width(cam) + u;
}

}  // namespace lcal

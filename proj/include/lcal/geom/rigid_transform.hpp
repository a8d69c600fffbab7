#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lcal {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Rigid body transformation (SE(3) element) stored as unit quaternion + translation.
class RigidTransform {
public:
  RigidTransform() : rotation_(Eigen::Quaterniond::Identity()), translation_(Eigen::Vector3d::Zero()) {}

  RigidTransform(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation)
  : rotation_(rotation.normalized()), translation_(translation) {}

  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
  : rotation_(Eigen::Quaterniond(rotation).normalized()), translation_(translation) {}

  static RigidTransform identity() { return RigidTransform(); }

  static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
    return RigidTransform(Eigen::Matrix3d(m.topLeftCorner<3, 3>()), Eigen::Vector3d(m.topRightCorner<3, 1>()));
  }

  /// Builds a transform from a [translation, rotation vector] 6-vector.
  static RigidTransform from_vector(const Vector6d& xi) {
    return RigidTransform(rotation_from_vector(xi.tail<3>()), xi.head<3>());
  }

  static Eigen::Quaterniond rotation_from_vector(const Eigen::Vector3d& omega) {
    const double angle = omega.norm();
    if (angle < 1e-15) {
      // first order, keeps the map smooth through zero
      return Eigen::Quaterniond(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z()).normalized();
    }
    return Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega / angle));
  }

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return RigidTransform(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
  }

  RigidTransform inverse() const {
    const Eigen::Quaterniond inv = rotation_.conjugate();
    return RigidTransform(inv, -(inv * translation_));
  }

  /// Returns exp(delta) * this, delta = [translation delta, rotation vector delta].
  RigidTransform perturbed(const Vector6d& delta) const { return from_vector(delta) * *this; }

  /// Rotation angle of this transform's rotation part [rad].
  double angle() const { return Eigen::AngleAxisd(rotation_).angle(); }

private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

inline Eigen::Vector3d se3_apply(const RigidTransform& transform, const Eigen::Vector3d& p) {
  return transform * p;
}

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return a * b;
}

inline RigidTransform inverse(const RigidTransform& transform) {
  return transform.inverse();
}

/// Translation and rotation (rad) distance between two transforms.
struct TransformError {
  double translation = 0.0;
  double rotation = 0.0;
};

inline TransformError transform_error(const RigidTransform& estimate, const RigidTransform& reference) {
  const RigidTransform delta = reference.inverse() * estimate;
  return {delta.translation().norm(), delta.angle()};
}

/// Angle between two 3x3 rotations [rad].
inline double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return Eigen::AngleAxisd(Eigen::Quaterniond(a.transpose() * b)).angle();
}

constexpr double deg2rad(double deg) {
  return deg * M_PI / 180.0;
}

constexpr double rad2deg(double rad) {
  return rad * 180.0 / M_PI;
}

}  // namespace lcal

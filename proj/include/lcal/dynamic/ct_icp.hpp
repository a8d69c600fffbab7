#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <lcal/cloud/point_cloud.hpp>
#include <lcal/dynamic/linear_ivox.hpp>
#include <lcal/error.hpp>
#include <lcal/geom/rigid_transform.hpp>
#include <lcal/optim/levenberg_marquardt.hpp>

namespace lcal {

/// Sensor poses (sensor -> map) at the beginning and the end of a scan.
struct ScanPosePair {
  RigidTransform begin;
  RigidTransform end;
};

/// Pose at normalized scan time s: slerp on rotation, lerp on translation.
inline RigidTransform interpolate_pose(const ScanPosePair& pair, double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw ArgumentError("pose interpolation parameter must lie in [0, 1], got " + std::to_string(s));
  }
  const Eigen::Quaterniond q = pair.begin.rotation().slerp(s, pair.end.rotation());
  const Eigen::Vector3d t = (1.0 - s) * pair.begin.translation() + s * pair.end.translation();
  return RigidTransform(q, t);
}

/// Transforms every point with the pose interpolated at its capture time.
inline std::vector<Eigen::Vector3d> deskew(const PointCloud& scan, const ScanPosePair& poses) {
  std::vector<Eigen::Vector3d> deskewed(scan.size());
  for (std::size_t i = 0; i < scan.size(); i++) {
    const double time = scan.times ? (*scan.times)[i] : 0.0;
    deskewed[i] = interpolate_pose(poses, time) * scan.points[i];
  }
  return deskewed;
}

struct CtIcpParams {
  int max_iterations = 30;
  double update_tolerance = 1e-6;
  int plane_neighbors = 10;
  double max_planarity_ratio = 0.1;        ///< skip a neighborhood when lambda_min / lambda_mid exceeds this
  double max_plane_deviation = 0.02;       ///< skip it also when a neighbor lies farther than this from the plane [m]
  double robust_scale = 0.1;               ///< Cauchy kernel scale on point-to-plane residuals [m]; 0 disables it
  double max_correspondence_distance = 1.0;
  int min_residuals = 20;
  double degenerate_time_prior_weight = 1e-3;
  double trim_factor = 3.0;                ///< drop residuals beyond trim_factor robust sigmas (median based)...
  double trim_floor = 0.02;                ///< ...but never below this [m]
  std::size_t max_residual_points = 5000;  ///< scans are strided down to this many residual points
};

struct CtIcpResult {
  ScanPosePair poses;
  int iterations = 0;
  bool converged = false;
  int num_residuals = 0;
  std::vector<LmStep> steps;  ///< cost before/after each accepted step (same associations)
};

namespace ct_icp_detail {

struct PlaneAssociation {
  std::size_t index;
  Eigen::Vector3d anchor;
  Eigen::Vector3d normal;
};

inline Vector6d relative_log(const ScanPosePair& x) {
  const RigidTransform delta = x.begin.inverse() * x.end;
  const Eigen::AngleAxisd aa(delta.rotation());
  Vector6d v;
  v << delta.translation(), aa.angle() * aa.axis();
  return v;
}

class CtIcpProblem {
public:
  using State = ScanPosePair;
  static constexpr int kDim = 12;

  CtIcpProblem(const PointCloud& scan, const LinearIVox& map, const CtIcpParams& params) : scan_(scan), map_(map), params_(params) {
    const std::size_t stride = std::max<std::size_t>(1, (scan.size() + params.max_residual_points - 1) / params.max_residual_points);
    for (std::size_t i = 0; i < scan.size(); i += stride) {
      samples_.push_back(i);
    }
    const auto [min_t, max_t] = std::minmax_element(scan.times->begin(), scan.times->end());
    degenerate_time_ = *max_t - *min_t < 1e-12;
  }

  void prepare(const State& x) {
    associations_.clear();
    const double max_dist2 = params_.max_correspondence_distance * params_.max_correspondence_distance;
    for (const std::size_t i : samples_) {
      const Eigen::Vector3d w = interpolate_pose(x, time(i)) * scan_.points[i];
      const auto neighbors = map_.nearest(w, params_.plane_neighbors);
      if (static_cast<int>(neighbors.size()) < std::min(params_.plane_neighbors, 5) || neighbors.front().squared_distance > max_dist2) {
        continue;
      }

      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const auto& n : neighbors) mean += n.point;
      mean /= static_cast<double>(neighbors.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& n : neighbors) cov += (n.point - mean) * (n.point - mean).transpose();

      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
      const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
      if (!(lambda[1] > 0.0) || lambda[0] / lambda[1] > params_.max_planarity_ratio) {
        continue;
      }
      const Eigen::Vector3d normal = eig.eigenvectors().col(0);
      // corners pass the eigenvalue test when one face dominates; their normals are skewed
      const bool straddles = std::any_of(neighbors.begin(), neighbors.end(), [&](const Neighbor& n) { return std::abs(normal.dot(n.point - mean)) > params_.max_plane_deviation; });
      if (straddles) {
        continue;
      }
      associations_.push_back({i, neighbors.front().point, normal});
    }

    // adaptive trimming: associations to a different surface stand out once the bulk has converged
    if (!associations_.empty() && params_.trim_factor > 0.0) {
      std::vector<double> magnitudes;
      magnitudes.reserve(associations_.size());
      for (const auto& a : associations_) {
        magnitudes.push_back(std::abs(a.normal.dot(interpolate_pose(x, time(a.index)) * scan_.points[a.index] - a.anchor)));
      }
      std::vector<double> sorted = magnitudes;
      std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
      const double threshold = std::max(params_.trim_factor * 1.4826 * sorted[sorted.size() / 2], params_.trim_floor);
      std::size_t kept = 0;
      for (std::size_t k = 0; k < associations_.size(); k++) {
        if (magnitudes[k] <= threshold) associations_[kept++] = associations_[k];
      }
      associations_.resize(kept);
    }

    if (static_cast<int>(associations_.size()) < params_.min_residuals) {
      throw InsufficientOverlapError("only " + std::to_string(associations_.size()) + " valid point-to-plane residuals (need " + std::to_string(params_.min_residuals) + ")");
    }
  }

  Eigen::VectorXd residuals(const State& x) const {
    const Eigen::Index extra = degenerate_time_ ? 6 : 0;
    Eigen::VectorXd r(static_cast<Eigen::Index>(associations_.size()) + extra);
    for (std::size_t k = 0; k < associations_.size(); k++) {
      const auto& a = associations_[k];
      const Eigen::Vector3d w = interpolate_pose(x, time(a.index)) * scan_.points[a.index];
      r[k] = a.normal.dot(w - a.anchor);
    }
    if (degenerate_time_) {
      r.tail<6>() = std::sqrt(params_.degenerate_time_prior_weight) * relative_log(x);
    }
    return r;
  }

  /// Sum of Cauchy-robustified squared point-to-plane residuals (plus the plain prior, if any).
  double cost(const State& x) const {
    const Eigen::VectorXd r = residuals(x);
    const Eigen::Index n = static_cast<Eigen::Index>(associations_.size());
    double total = 0.0;
    for (Eigen::Index k = 0; k < r.size(); k++) {
      total += k < n ? rho(r[k] * r[k]) : r[k] * r[k];
    }
    return total;
  }

  void normal_equations(const State& x, Eigen::Matrix<double, kDim, kDim>& H, Eigen::Matrix<double, kDim, 1>& b) const {
    constexpr double h = 1e-6;
    const Eigen::VectorXd r0 = residuals(x);
    Eigen::MatrixXd J(r0.size(), kDim);
    for (int k = 0; k < kDim; k++) {
      Eigen::Matrix<double, kDim, 1> delta = Eigen::Matrix<double, kDim, 1>::Zero();
      delta[k] = h;
      const Eigen::VectorXd plus = residuals(retract(x, delta));
      const Eigen::VectorXd minus = residuals(retract(x, -delta));
      J.col(k) = (plus - minus) / (2.0 * h);
    }
    // iteratively reweighted: each row scaled by the kernel derivative at its residual
    Eigen::VectorXd w = Eigen::VectorXd::Ones(r0.size());
    for (std::size_t k = 0; k < associations_.size(); k++) {
      w[k] = weight(r0[k] * r0[k]);
    }
    H = J.transpose() * w.asDiagonal() * J;
    b = J.transpose() * w.asDiagonal() * r0;
  }

  State retract(const State& x, const Eigen::Matrix<double, kDim, 1>& delta) const {
    return {x.begin.perturbed(delta.head<6>()), x.end.perturbed(delta.tail<6>())};
  }

  int num_residuals() const { return static_cast<int>(associations_.size()); }

private:
  double time(std::size_t i) const { return (*scan_.times)[i]; }

  double rho(double s) const {
    const double c2 = params_.robust_scale * params_.robust_scale;
    return c2 > 0.0 ? c2 * std::log1p(s / c2) : s;
  }

  double weight(double s) const {
    const double c2 = params_.robust_scale * params_.robust_scale;
    return c2 > 0.0 ? 1.0 / (1.0 + s / c2) : 1.0;
  }

  const PointCloud& scan_;
  const LinearIVox& map_;
  const CtIcpParams& params_;
  std::vector<std::size_t> samples_;
  std::vector<PlaneAssociation> associations_;
  bool degenerate_time_ = false;
};

}  // namespace ct_icp_detail

/// Simplified continuous-time ICP: jointly estimates the scan begin and end poses by
/// Levenberg-Marquardt on Cauchy-robustified point-to-plane residuals of the deskewed scan against the map.
/// Each scan point is moved with the pose interpolated at its timestamp, associated with its
/// nearest map point, and measured along the normal of a plane fitted to its nearest map points.
/// When all timestamps are equal, the end pose is weakly pulled toward the begin pose.
///
/// Throws InsufficientOverlapError when fewer than min_residuals residuals are valid.
inline CtIcpResult ct_icp_align(const PointCloud& scan, const LinearIVox& map, const ScanPosePair& init, const CtIcpParams& params = {}) {
  scan.validate();
  if (!scan.has_times()) {
    throw ArgumentError("ct_icp_align requires per-point timestamps");
  }
  if (map.empty() || scan.empty()) {
    throw InsufficientOverlapError("empty map or scan");
  }

  ct_icp_detail::CtIcpProblem problem(scan, map, params);
  LmOptions options;
  options.max_iterations = params.max_iterations;
  options.update_tolerance = params.update_tolerance;
  const auto summary = levenberg_marquardt<ct_icp_detail::CtIcpProblem::kDim>(problem, init, options);

  CtIcpResult result;
  result.poses = summary.state;
  result.iterations = summary.iterations;
  result.converged = summary.converged;
  result.num_residuals = problem.num_residuals();
  result.steps = summary.steps;
  return result;
}

}  // namespace lcal

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <lcal/error.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/geom/rigid_transform.hpp>
#include <lcal/init/correspondences.hpp>
#include <lcal/optim/levenberg_marquardt.hpp>

namespace lcal {

struct RefineParams {
  std::optional<double> cauchy_scale;  ///< defaults to the RANSAC threshold of the camera model
  int max_iterations = 100;
  double update_tolerance = 1e-8;
  double pixel_threshold = 20.0;
  double angular_threshold = 0.02;

  double scale_for(const CameraModel& cam) const {
    if (cauchy_scale) return *cauchy_scale;
    return is_equirectangular(cam) ? angular_threshold : pixel_threshold;
  }
};

struct RefineResult {
  RigidTransform T_camera_lidar;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

namespace refine_detail {

/// Robust reprojection problem. Pinhole residuals are pixel offsets; equirectangular residuals
/// are bearing differences (chord length, radians for small errors).
class ReprojectionProblem {
public:
  using State = RigidTransform;

  ReprojectionProblem(const CorrespondenceSet& corr, const CameraModel& cam, double c) : corr_(corr), cam_(cam), c2_(c * c) {
    for (const auto& pair : corr.pairs) {
      targets_.push_back(unproject(cam, pair.pixel).vec());
    }
  }

  void prepare(const State&) {}

  double cost(const State& T) const {
    double total = 0.0;
    for (std::size_t j = 0; j < corr_.size(); j++) {
      total += rho(residual(T, j).squaredNorm());
    }
    return total;
  }

  void normal_equations(const State& T, Eigen::Matrix<double, 6, 6>& H, Eigen::Matrix<double, 6, 1>& b) const {
    constexpr double h = 1e-6;
    H.setZero();
    b.setZero();
    for (std::size_t j = 0; j < corr_.size(); j++) {
      const Eigen::VectorXd r = residual(T, j);
      Eigen::MatrixXd J(r.size(), 6);
      for (int k = 0; k < 6; k++) {
        Vector6d delta = Vector6d::Zero();
        delta[k] = h;
        J.col(k) = (residual(T.perturbed(delta), j) - residual(T.perturbed(-delta), j)) / (2.0 * h);
      }
      // iteratively reweighted Gauss-Newton: weight is the Cauchy kernel's derivative
      const double w = 1.0 / (1.0 + r.squaredNorm() / c2_);
      H += w * J.transpose() * J;
      b += w * J.transpose() * r;
    }
  }

  State retract(const State& T, const Eigen::Matrix<double, 6, 1>& delta) const { return T.perturbed(delta); }

private:
  double rho(double s) const { return c2_ * std::log1p(s / c2_); }

  Eigen::VectorXd residual(const State& T, std::size_t j) const {
    const Eigen::Vector3d p = T * corr_.pairs[j].point;
    if (is_equirectangular(cam_)) {
      const double n = p.norm();
      if (!(n > 0.0)) return Eigen::Vector3d::Constant(2.0);
      return p / n - targets_[j];
    }
    const auto x = project(cam_, p);
    if (!x) {
      // behind the camera: a large constant residual with no gradient
      return Eigen::Vector2d::Constant(1e3 * std::sqrt(c2_));
    }
    return *x - corr_.pairs[j].pixel;
  }

  const CorrespondenceSet& corr_;
  const CameraModel& cam_;
  double c2_;
  std::vector<Eigen::Vector3d> targets_;
};

}  // namespace refine_detail

/// Minimizes sum rho(|pi(T p_j) - x_j|^2) with the Cauchy kernel rho(s) = c^2 log(1 + s / c^2)
/// by Levenberg-Marquardt starting from T_init. Never returns a pose costlier than T_init.
inline RefineResult refine_reprojection(const CorrespondenceSet& corr, const CameraModel& cam, const RigidTransform& T_init, const RefineParams& params = {}) {
  if (corr.size() < 3) {
    throw InsufficientCorrespondencesError("reprojection refinement needs at least 3 correspondences, got " + std::to_string(corr.size()));
  }
  const double c = params.scale_for(cam);
  if (!(c > 0.0)) throw ArgumentError("Cauchy scale must be positive");

  refine_detail::ReprojectionProblem problem(corr, cam, c);
  LmOptions options;
  options.max_iterations = params.max_iterations;
  options.update_tolerance = params.update_tolerance;
  const auto summary = levenberg_marquardt<6>(problem, T_init, options);

  RefineResult result;
  result.T_camera_lidar = summary.state;
  result.initial_cost = summary.initial_cost;
  result.final_cost = summary.final_cost;
  result.iterations = summary.iterations;
  result.converged = summary.converged;
  if (summary.diverged) {
    result.warnings.push_back("Levenberg-Marquardt could not decrease the robust cost further; returning the best estimate so far");
  }
  return result;
}

}  // namespace lcal

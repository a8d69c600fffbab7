#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include <lcal/error.hpp>

namespace lcal {

struct NelderMeadParams {
  /// Initial simplex step per axis. Defaults cover a [translation, rotation vector] 6-vector.
  Eigen::VectorXd steps = (Eigen::VectorXd(6) << 0.01, 0.01, 0.01, 0.01, 0.01, 0.01).finished();
  double function_tolerance = 1e-8;   ///< converged when max f - min f over the simplex is below this
  double parameter_tolerance = 1e-7;  ///< and every vertex is this close (inf-norm) to the best vertex
  int max_evaluations = 500;

  void validate(Eigen::Index dim) const {
    if (steps.size() != dim) {
      throw ArgumentError("Nelder-Mead step vector dimension mismatch");
    }
    if (!(steps.array() > 0.0).all()) {
      throw ArgumentError("Nelder-Mead steps must be positive");
    }
    if (max_evaluations < 1) {
      throw ArgumentError("Nelder-Mead needs at least one evaluation");
    }
  }
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
};

/// Downhill simplex minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
/// Non-finite objective values during the search are treated as +inf.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective, const Eigen::VectorXd& x0, const NelderMeadParams& params = {}) {
  const Eigen::Index n = x0.size();
  params.validate(n);

  NelderMeadResult result;
  const auto evaluate = [&](const Eigen::VectorXd& x) {
    result.evaluations++;
    const double f = objective(x);
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> vertices(n + 1, x0);
  std::vector<double> values(n + 1);

  result.evaluations++;
  values[0] = objective(x0);
  if (!std::isfinite(values[0])) {
    throw ArgumentError("Nelder-Mead objective is not finite at the initial point");
  }
  for (Eigen::Index i = 0; i < n; i++) {
    vertices[i + 1][i] += params.steps[i];
    values[i + 1] = evaluate(vertices[i + 1]);
  }

  std::vector<std::size_t> order(n + 1);
  const auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> sorted_vertices(n + 1);
    std::vector<double> sorted_values(n + 1);
    for (Eigen::Index i = 0; i <= n; i++) {
      sorted_vertices[i] = std::move(vertices[order[i]]);
      sorted_values[i] = values[order[i]];
    }
    vertices = std::move(sorted_vertices);
    values = std::move(sorted_values);
  };

  while (true) {
    sort_simplex();

    const double spread = values[n] - values[0];
    double diameter = 0.0;
    for (Eigen::Index i = 1; i <= n; i++) {
      diameter = std::max(diameter, (vertices[i] - vertices[0]).lpNorm<Eigen::Infinity>());
    }
    if (spread < params.function_tolerance && diameter < params.parameter_tolerance) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= params.max_evaluations) {
      break;
    }
    result.iterations++;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; i++) {
      centroid += vertices[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd& worst = vertices[n];
    const Eigen::VectorXd reflected = centroid + (centroid - worst);
    const double f_reflected = evaluate(reflected);

    if (f_reflected < values[0]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - worst);
      const double f_expanded = evaluate(expanded);
      if (f_expanded < f_reflected) {
        vertices[n] = expanded;
        values[n] = f_expanded;
      } else {
        vertices[n] = reflected;
        values[n] = f_reflected;
      }
      continue;
    }

    if (f_reflected < values[n - 1]) {
      vertices[n] = reflected;
      values[n] = f_reflected;
      continue;
    }

    bool shrink = false;
    if (f_reflected < values[n]) {
      const Eigen::VectorXd contracted = centroid + 0.5 * (reflected - centroid);
      const double f_contracted = evaluate(contracted);
      if (f_contracted <= f_reflected) {
        vertices[n] = contracted;
        values[n] = f_contracted;
      } else {
        shrink = true;
      }
    } else {
      const Eigen::VectorXd contracted = centroid + 0.5 * (worst - centroid);
      const double f_contracted = evaluate(contracted);
      if (f_contracted < values[n]) {
        vertices[n] = contracted;
        values[n] = f_contracted;
      } else {
        shrink = true;
      }
    }

    if (shrink) {
      for (Eigen::Index i = 1; i <= n; i++) {
        vertices[i] = vertices[0] + 0.5 * (vertices[i] - vertices[0]);
        values[i] = evaluate(vertices[i]);
      }
    }
  }

  result.x = vertices[0];
  result.value = values[0];
  return result;
}

}  // namespace lcal

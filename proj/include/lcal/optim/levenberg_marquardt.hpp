#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Cholesky>

namespace lcal {

struct LmOptions {
  int max_iterations = 100;
  double update_tolerance = 1e-8;  ///< stop when the accepted/proposed update norm falls below this
  double initial_lambda = 1e-4;
  double max_lambda = 1e10;
};

/// Cost under one linearization: before and after an accepted step.
struct LmStep {
  double cost_before = 0.0;
  double cost_after = 0.0;
};

template <typename State>
struct LmSummary {
  State state;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;  ///< lambda hit its cap without a cost decrease
  std::vector<LmStep> steps;
};

/// Dense Levenberg-Marquardt over a Dim-dimensional tangent space.
///
/// Problem must provide:
///   using State = ...;
///   void prepare(const State&);   // refresh data associations, called once per iteration
///   double cost(const State&) const;
///   void normal_equations(const State&, Eigen::Matrix<double, Dim, Dim>& H, Eigen::Matrix<double, Dim, 1>& b) const;  // H = J^T W J, b = J^T W r
///   State retract(const State&, const Eigen::Matrix<double, Dim, 1>& delta) const;
///
/// Steps are accepted only if they decrease the cost under the current association.
template <int Dim, typename Problem>
LmSummary<typename Problem::State> levenberg_marquardt(Problem& problem, const typename Problem::State& x0, const LmOptions& options) {
  using State = typename Problem::State;
  using MatrixD = Eigen::Matrix<double, Dim, Dim>;
  using VectorD = Eigen::Matrix<double, Dim, 1>;

  LmSummary<State> summary;
  summary.state = x0;

  State x = x0;
  problem.prepare(x);
  double cost = problem.cost(x);
  summary.initial_cost = cost;

  double lambda = options.initial_lambda;
  for (int iter = 0; iter < options.max_iterations; iter++) {
    summary.iterations = iter + 1;
    if (iter > 0) {
      problem.prepare(x);
      cost = problem.cost(x);
    }

    MatrixD H;
    VectorD b;
    problem.normal_equations(x, H, b);

    bool accepted = false;
    while (true) {
      MatrixD damped = H;
      damped.diagonal() += lambda * (H.diagonal().array() + 1e-9).matrix();
      const VectorD delta = damped.ldlt().solve(-b);

      if (!delta.allFinite()) {
        lambda *= 10.0;
      } else if (delta.norm() < options.update_tolerance) {
        summary.converged = true;
        break;
      } else {
        const State candidate = problem.retract(x, delta);
        const double candidate_cost = problem.cost(candidate);
        if (candidate_cost < cost) {
          summary.steps.push_back({cost, candidate_cost});
          x = candidate;
          cost = candidate_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          if (delta.norm() < options.update_tolerance) {
            summary.converged = true;
          }
          break;
        }
        lambda *= 10.0;
      }

      if (lambda > options.max_lambda) {
        summary.diverged = true;
        break;
      }
    }

    if (summary.converged || !accepted) {
      break;
    }
  }

  summary.state = x;
  summary.final_cost = cost;
  return summary;
}

}  // namespace lcal

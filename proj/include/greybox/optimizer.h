#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace greybox {

// Box bounds; entries may be +/-infinity.
struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Bounds unbounded(Eigen::Index n);
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

struct OptimizerOptions {
  double gradient_tolerance = 1e-8;
  double relative_decrease_tolerance = 1e-12;
  int max_iterations = 500;
  double fd_relative_step = 1e-6;
  // A run that stalls on the decrease test (or in the line search) still
  // counts as converged when |projected gradient| <= this * (1 + |f|).
  double acceptance_gradient_tolerance = 1e-4;

  bool operator==(const OptimizerOptions&) const = default;
};

enum class StopReason {
  kGradient,
  kRelativeDecrease,
  kIterationLimit,
  kLineSearchFailure,
  kNonFiniteStart,
};

std::string_view to_string(StopReason reason);

struct OptimizationRun {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  double gradient_norm = 0.0;       // inf-norm of the projected gradient
  double gradient_tolerance = 0.0;  // the bound `converged` was judged by
  StopReason reason = StopReason::kIterationLimit;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Central differences with step rel_step * max(1, |x_i|), one-sided where a
// bound is in the way.
Eigen::VectorXd finite_difference_gradient(const Objective& f,
                                           const Eigen::VectorXd& x,
                                           const Bounds& bounds,
                                           double rel_step, double fx);

// Projected BFGS with Armijo backtracking along the projection arc.
// Non-finite objective values (and exceptions) are treated as +inf.
OptimizationRun minimize(const Objective& f, const Eigen::VectorXd& start,
                         const Bounds& bounds, const OptimizerOptions& options);

struct MultiStartResult {
  OptimizationRun best;
  int best_index = -1;
  std::vector<OptimizationRun> runs;
  int converged_count = 0;
};

// Best converged run; ties go to the lowest start index. Starts whose
// objective is non-finite are discarded. Throws NoConvergedStart.
MultiStartResult optimize(const Objective& f, const Bounds& bounds,
                          const std::vector<Eigen::VectorXd>& starts,
                          const OptimizerOptions& options);

// `count` points uniform over a finite box, seeded.
std::vector<Eigen::VectorXd> uniform_starts(const Bounds& bounds, int count,
                                            std::uint64_t seed);

}  // namespace greybox

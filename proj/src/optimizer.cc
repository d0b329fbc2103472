#include "greybox/optimizer.h"

#include <cmath>
#include <limits>
#include <string>

#include "greybox/error.h"
#include "greybox/random.h"

namespace greybox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Eigen::VectorXd& x) {
  double v = kInf;
  try {
    v = f(x);
  } catch (const std::exception&) {
    return kInf;
  }
  return std::isfinite(v) ? v : kInf;
}

Eigen::VectorXd projected_gradient(const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& x,
                                   const Bounds& bounds) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= bounds.lower[i] && g[i] > 0.0) ||
        (x[i] >= bounds.upper[i] && g[i] < 0.0)) {
      pg[i] = 0.0;
    }
  }
  return pg;
}

}  // namespace

Bounds Bounds::unbounded(Eigen::Index n) {
  return {Eigen::VectorXd::Constant(n, -kInf), Eigen::VectorXd::Constant(n, kInf)};
}

Eigen::VectorXd Bounds::project(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kGradient: return "gradient";
    case StopReason::kRelativeDecrease: return "relative_decrease";
    case StopReason::kIterationLimit: return "iteration_limit";
    case StopReason::kLineSearchFailure: return "line_search_failure";
    case StopReason::kNonFiniteStart: return "non_finite_start";
  }
  return "?";
}

Eigen::VectorXd finite_difference_gradient(const Objective& f,
                                           const Eigen::VectorXd& x,
                                           const Bounds& bounds,
                                           double rel_step, double fx) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    const bool up_ok = x[i] + h <= bounds.upper[i];
    const bool down_ok = x[i] - h >= bounds.lower[i];
    if (up_ok && down_ok) {
      probe[i] = x[i] + h;
      const double fp = safe_eval(f, probe);
      probe[i] = x[i] - h;
      const double fm = safe_eval(f, probe);
      g[i] = (fp - fm) / (2.0 * h);
    } else if (up_ok) {
      probe[i] = x[i] + h;
      g[i] = (safe_eval(f, probe) - fx) / h;
    } else {
      probe[i] = x[i] - h;
      g[i] = (fx - safe_eval(f, probe)) / h;
    }
    probe[i] = x[i];
  }
  return g;
}

OptimizationRun minimize(const Objective& f, const Eigen::VectorXd& start,
                         const Bounds& bounds, const OptimizerOptions& options) {
  const Eigen::Index n = start.size();
  int evaluations = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evaluations;
    return safe_eval(f, x);
  };
  auto gradient = [&](const Eigen::VectorXd& x, double fx) {
    evaluations += static_cast<int>(2 * n);
    return finite_difference_gradient(f, x, bounds, options.fd_relative_step, fx);
  };

  OptimizationRun run;
  run.x = bounds.project(start);
  run.value = eval(run.x);
  if (!std::isfinite(run.value)) {
    run.reason = StopReason::kNonFiniteStart;
    run.gradient_norm = kInf;
    run.evaluations = evaluations;
    return run;
  }

  Eigen::VectorXd g = gradient(run.x, run.value);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  run.reason = StopReason::kIterationLimit;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (!g.allFinite()) {
      run.reason = StopReason::kLineSearchFailure;
      break;
    }
    run.gradient_norm = projected_gradient(g, run.x, bounds).lpNorm<Eigen::Infinity>();
    if (run.gradient_norm <= options.gradient_tolerance) {
      run.reason = StopReason::kGradient;
      break;
    }

    // Variables pinned at a bound with the gradient pushing outward stay put.
    Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((run.x[i] <= bounds.lower[i] && g[i] > 0.0) ||
          (run.x[i] >= bounds.upper[i] && g[i] < 0.0)) {
        free[i] = 0.0;
      }
    }
    const Eigen::VectorXd gf = g.cwiseProduct(free);
    Eigen::VectorXd d = -(free.asDiagonal() * h_inv * gf);
    if (!(d.dot(g) < 0.0)) {
      h_inv.setIdentity();
      scaled = false;
      d = -gf;
    }

    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = kInf;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double alpha = 1.0;
      if (!scaled) alpha = std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>());
      for (int ls = 0; ls < 50; ++ls) {
        x_new = bounds.project(run.x + alpha * d);
        if ((x_new - run.x).lpNorm<Eigen::Infinity>() == 0.0) break;
        f_new = eval(x_new);
        if (std::isfinite(f_new) &&
            f_new <= run.value + 1e-4 * g.dot(x_new - run.x)) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        if (scaled || h_inv != Eigen::MatrixXd::Identity(n, n)) {
          h_inv.setIdentity();
          scaled = false;
          d = -gf;
        } else {
          break;
        }
      }
    }
    if (!accepted) {
      run.reason = StopReason::kLineSearchFailure;
      break;
    }

    const Eigen::VectorXd g_new = gradient(x_new, f_new);
    const Eigen::VectorXd s = x_new - run.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && g_new.allFinite()) {
      if (!scaled) {
        h_inv = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left =
          Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }

    const double decrease = run.value - f_new;
    run.x = x_new;
    run.value = f_new;
    g = g_new;
    run.iterations = iter + 1;
    if (decrease <= options.relative_decrease_tolerance *
                        std::max(std::abs(run.value + decrease),
                                 std::numeric_limits<double>::min())) {
      run.reason = StopReason::kRelativeDecrease;
      run.gradient_norm =
          projected_gradient(g, run.x, bounds).lpNorm<Eigen::Infinity>();
      break;
    }
  }
  if (run.reason == StopReason::kIterationLimit) {
    run.gradient_norm = projected_gradient(g, run.x, bounds).lpNorm<Eigen::Infinity>();
  }

  if (run.reason == StopReason::kGradient) {
    run.gradient_tolerance = options.gradient_tolerance;
    run.converged = true;
  } else {
    run.gradient_tolerance =
        options.acceptance_gradient_tolerance * (1.0 + std::abs(run.value));
    run.converged = (run.reason == StopReason::kRelativeDecrease ||
                     run.reason == StopReason::kLineSearchFailure) &&
                    run.gradient_norm <= run.gradient_tolerance;
  }
  run.evaluations = evaluations;
  return run;
}

MultiStartResult optimize(const Objective& f, const Bounds& bounds,
                          const std::vector<Eigen::VectorXd>& starts,
                          const OptimizerOptions& options) {
  MultiStartResult result;
  for (const auto& start : starts) {
    result.runs.push_back(minimize(f, start, bounds, options));
    const OptimizationRun& run = result.runs.back();
    if (!run.converged) continue;
    ++result.converged_count;
    if (result.best_index < 0 || run.value < result.best.value) {
      result.best = run;
      result.best_index = static_cast<int>(result.runs.size()) - 1;
    }
  }
  if (result.best_index < 0) {
    std::string detail;
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
      detail += " [" + std::to_string(i) + ": " +
                std::string(to_string(result.runs[i].reason)) + "]";
    }
    throw Error(ErrorCode::kNoConvergedStart,
                std::to_string(starts.size()) + " starts, none converged:" + detail);
  }
  return result;
}

std::vector<Eigen::VectorXd> uniform_starts(const Bounds& bounds, int count,
                                            std::uint64_t seed) {
  if (!bounds.lower.allFinite() || !bounds.upper.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "uniform starts need a finite box");
  }
  Rng rng(seed);
  std::vector<Eigen::VectorXd> starts;
  for (int s = 0; s < count; ++s) {
    Eigen::VectorXd x(bounds.lower.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x[i] = rng.uniform(bounds.lower[i], bounds.upper[i]);
    }
    starts.push_back(std::move(x));
  }
  return starts;
}

}  // namespace greybox

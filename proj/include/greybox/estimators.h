#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "greybox/optimizer.h"
#include "greybox/random.h"
#include "greybox/rc_model.h"
#include "greybox/simulator.h"

namespace greybox {

enum class Method { kNls, kBe, kMle };

inline constexpr Method kAllMethods[] = {Method::kNls, Method::kBe, Method::kMle};

std::string_view to_string(Method method);  // "NLS", "BE", "MLE"
Method parse_method(std::string_view text);

// Box for each parameter kind. Gains may touch zero; R and C may not.
struct ParameterBounds {
  double resistance_lower = 1e-4;  // K/W
  double resistance_upper = 1.0;
  double capacitance_lower = 1e4;  // J/K
  double capacitance_upper = 1e9;
  double gain_lower = 0.0;
  double gain_upper = 5.0;

  std::pair<double, double> of(ParameterKind kind) const;
  void validate() const;
  bool operator==(const ParameterBounds&) const = default;
};

// Maps theta to the optimizer's coordinates: log for R and C, a logistic
// reparametrization of the gain box, or the identity when log_space is off.
class ParameterTransform {
 public:
  static constexpr double kLogitLimit = 30.0;

  ParameterTransform(ModelOrder order, const ParameterBounds& bounds,
                     bool log_space = true);

  ModelOrder order() const { return order_; }
  Eigen::VectorXd to_internal(const ParameterVector& theta) const;
  // Result is clamped into the parameter box.
  ParameterVector to_parameters(const Eigen::VectorXd& z) const;
  const Bounds& internal_bounds() const { return internal_; }

  // R and C log-uniform, gains uniform over the box.
  Eigen::VectorXd sample_start(Rng& rng) const;
  std::vector<Eigen::VectorXd> sample_starts(int count, std::uint64_t seed) const;

 private:
  ModelOrder order_;
  bool log_space_;
  std::vector<ParameterKind> kinds_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Bounds internal_;
};

// Training record as the estimators see it.
struct EstimationData {
  Eigen::VectorXd u;  // Q_HVAC, W
  Eigen::MatrixXd w;  // N x n_w disturbances
  Eigen::VectorXd y;  // measured T_z
  double t_s = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

EstimationData estimation_data(ModelOrder order, const SimulationTrace& trace);

struct EstimationHyperparameters {
  ParameterBounds bounds;
  bool log_transform = true;
  double process_variance = 1e-4;      // Q_cov = q I, K^2 per step
  double measurement_variance = 0.0025;  // R_var, K^2
  double initial_variance = 1.0;       // P0 = p I, K^2
  int starts = 8;
  OptimizerOptions optimizer;

  void validate() const;
  bool operator==(const EstimationHyperparameters&) const = default;
};

struct EstimationProblem {
  ModelOrder order = ModelOrder::kSM1;
  EstimationData data;
  ParameterBounds bounds;
  bool log_transform = true;
  Eigen::VectorXd x0;
  Eigen::MatrixXd p0;
  Eigen::MatrixXd q_cov;
  double r_var = 0.0025;
  std::optional<ParameterVector> initial_guess;
  OptimizerOptions optimizer;

  // Throws InvalidArgument (shapes, trace shorter than 10 n_params,
  // R_var <= 0, Q_cov not PSD) or SingularCovariance.
  void validate() const;
};

// x0 = initial_state(order, y(0)), covariances from the hyperparameters.
EstimationProblem make_problem(ModelOrder order, const SimulationTrace& trace,
                               const EstimationHyperparameters& hyper);

struct EstimationResult {
  Method method = Method::kNls;
  ParameterVector theta_hat{ModelOrder::kSM1, Eigen::VectorXd::Ones(5)};
  double objective = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  double gradient_tolerance = 0.0;
  int start_index = -1;
  int starts_attempted = 0;
  int starts_converged = 0;
  std::string config_hash;
};

// Single-shooting rollout from problem.x0; returns N x n states.
Eigen::MatrixXd rollout(const DiscreteModel& model, const EstimationData& data,
                        const Eigen::VectorXd& x0);
// Sum over all samples of (y - C x)^2.
double nls_objective(const EstimationProblem& problem, const ParameterVector& theta);

struct SmootherSolution {
  Eigen::MatrixXd states;  // N x n
  double objective = 0.0;  // prior + measurement + process terms at the optimum
};

// Exact minimizer over x_0..x_{N-1} of
//   (x_0 - m)' P0^-1 (x_0 - m) + sum (y_k - C x_k)^2 / R
//     + sum (x_{k+1} - A_d x_k - B_d u_k - D_d w_k)' Q^-1 (...)
// via block-tridiagonal Cholesky on the normal equations.
SmootherSolution batch_smooth(const DiscreteModel& model,
                              const EstimationData& data,
                              const Eigen::VectorXd& x0_mean,
                              const Eigen::MatrixXd& p0,
                              const Eigen::MatrixXd& q_cov, double r_var);
double be_objective(const EstimationProblem& problem, const ParameterVector& theta);

struct InnovationUpdate {
  double s = 0.0;        // C P C' + R
  Eigen::VectorXd gain;  // P C' / S
};

// Throws FilterDivergence when S is not positive and finite.
InnovationUpdate innovation_update(const Eigen::MatrixXd& p,
                                   const Eigen::RowVectorXd& c, double r_var);

struct FilterRun {
  Eigen::VectorXd innovations;
  Eigen::VectorXd innovation_variances;
  Eigen::MatrixXd predicted;  // N x n, one-step-ahead state predictions
  double nll = 0.0;           // sum e^2 / S + log S
  double min_covariance_eigenvalue = 0.0;
};

// Predictor-form Kalman filter. Throws FilterDivergence.
FilterRun kalman_filter(const DiscreteModel& model, const EstimationData& data,
                        const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                        const Eigen::MatrixXd& q_cov, double r_var,
                        bool track_eigenvalues = false);
double mle_objective(const EstimationProblem& problem, const ParameterVector& theta);

double objective(Method method, const EstimationProblem& problem,
                 const ParameterVector& theta);

// Multi-start fit. With an initial guess it is start 0 and `starts - 1`
// sampled starts follow. Sampled points whose objective is not finite
// (typically an unstable discretization) are redrawn, up to
// kMaxDrawsPerStart draws per start. Throws NoConvergedStart.
inline constexpr int kMaxDrawsPerStart = 200;

EstimationResult estimate(Method method, const EstimationProblem& problem,
                          int starts, std::uint64_t seed);
EstimationResult estimate_nls(const EstimationProblem& problem, int starts,
                              std::uint64_t seed);
EstimationResult estimate_be(const EstimationProblem& problem, int starts,
                             std::uint64_t seed);
EstimationResult estimate_mle(const EstimationProblem& problem, int starts,
                              std::uint64_t seed);

// Rate and gain combinations that fix the output map.
//   SM1: 1/(R_win C_in), A_ih/C_in, B_ac/C_in, D_solar/C_in
//   SM2: 2/(R_w C_in), 1/(R_win C_in), A_ih/C_in, B_ac/C_in, 2/(R_w C_w),
//        D_solar/C_w
//   SM4: every nonzero entry of A, B and D
Eigen::VectorXd to_aggregates(const ParameterVector& theta);
const std::vector<std::string>& aggregate_names(ModelOrder order);

// Hex digest of everything that determines a fit.
std::string problem_hash(Method method, const EstimationProblem& problem,
                         int starts, std::uint64_t seed);

// Flat key/value document: method, order, diagnostics, theta.<name>,
// aggregate.<name>, config_hash.
std::string to_text(const EstimationResult& result);
EstimationResult result_from_text(std::string_view text);

}  // namespace greybox

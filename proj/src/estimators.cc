#include "greybox/estimators.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "greybox/error.h"
#include "greybox/random.h"

namespace greybox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Small fixed-capacity blocks keep the per-step recursions allocation-free.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;

Eigen::MatrixXd drive_matrix(const DiscreteModel& model, const EstimationData& data) {
  return model.Bd * data.u.transpose() + model.Dd * data.w.transpose();
}

DiscreteModel discretize_for(const EstimationProblem& problem,
                             const ParameterVector& theta) {
  if (theta.order() != problem.order) {
    throw Error(ErrorCode::kOrderMismatch, "theta order does not match problem");
  }
  return discretize(assemble(theta), problem.data.t_s);
}

Mat spd_inverse(const Eigen::MatrixXd& m, std::string_view what) {
  const Mat mm = m;
  Eigen::LLT<Mat> llt(mm);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularCovariance, std::string(what) + " is not positive definite");
  }
  Mat inv = llt.solve(Mat::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kNls: return "NLS";
    case Method::kBe: return "BE";
    case Method::kMle: return "MLE";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "NLS" || upper == "LS") return Method::kNls;
  if (upper == "BE") return Method::kBe;
  if (upper == "MLE") return Method::kMle;
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + std::string(text) + "'");
}

// --- bounds and transform ---------------------------------------------------

std::pair<double, double> ParameterBounds::of(ParameterKind kind) const {
  switch (kind) {
    case ParameterKind::kResistance: return {resistance_lower, resistance_upper};
    case ParameterKind::kCapacitance: return {capacitance_lower, capacitance_upper};
    case ParameterKind::kGain: return {gain_lower, gain_upper};
  }
  return {0.0, 0.0};
}

void ParameterBounds::validate() const {
  auto check = [](double lo, double hi, bool positive, const char* what) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi) ||
        (positive && !(lo > 0.0))) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("invalid ") + what + " bounds");
    }
  };
  check(resistance_lower, resistance_upper, true, "resistance");
  check(capacitance_lower, capacitance_upper, true, "capacitance");
  check(gain_lower, gain_upper, false, "gain");
}

ParameterTransform::ParameterTransform(ModelOrder order, const ParameterBounds& bounds,
                                       bool log_space)
    : order_(order), log_space_(log_space) {
  bounds.validate();
  const auto& names = parameter_names(order);
  const auto n = static_cast<Eigen::Index>(names.size());
  lower_.resize(n);
  upper_.resize(n);
  internal_.lower.resize(n);
  internal_.upper.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ParameterKind kind = parameter_kind(names[static_cast<std::size_t>(i)]);
    kinds_.push_back(kind);
    const auto [lo, hi] = bounds.of(kind);
    lower_[i] = lo;
    upper_[i] = hi;
    if (!log_space_) {
      internal_.lower[i] = lo;
      internal_.upper[i] = hi;
    } else if (kind == ParameterKind::kGain) {
      internal_.lower[i] = -kLogitLimit;
      internal_.upper[i] = kLogitLimit;
    } else {
      internal_.lower[i] = std::log(lo);
      internal_.upper[i] = std::log(hi);
    }
  }
}

Eigen::VectorXd ParameterTransform::to_internal(const ParameterVector& theta) const {
  if (theta.order() != order_) {
    throw Error(ErrorCode::kOrderMismatch, "theta order does not match transform");
  }
  Eigen::VectorXd z(theta.values().size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = std::clamp(theta.values()[i], lower_[i], upper_[i]);
    if (!log_space_) {
      z[i] = v;
    } else if (kinds_[static_cast<std::size_t>(i)] == ParameterKind::kGain) {
      const double p = (v - lower_[i]) / (upper_[i] - lower_[i]);
      z[i] = std::clamp(std::log(p) - std::log1p(-p), -kLogitLimit, kLogitLimit);
    } else {
      z[i] = std::log(v);
    }
  }
  return z;
}

ParameterVector ParameterTransform::to_parameters(const Eigen::VectorXd& z) const {
  Eigen::VectorXd v(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double value;
    if (!log_space_) {
      value = z[i];
    } else if (kinds_[static_cast<std::size_t>(i)] == ParameterKind::kGain) {
      value = lower_[i] + (upper_[i] - lower_[i]) / (1.0 + std::exp(-z[i]));
    } else {
      value = std::exp(z[i]);
    }
    v[i] = std::clamp(value, lower_[i], upper_[i]);
  }
  return ParameterVector(order_, std::move(v));
}

Eigen::VectorXd ParameterTransform::sample_start(Rng& rng) const {
  Eigen::VectorXd v(lower_.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (kinds_[static_cast<std::size_t>(i)] == ParameterKind::kGain) {
      v[i] = rng.uniform(lower_[i], upper_[i]);
    } else {
      v[i] = std::exp(rng.uniform(std::log(lower_[i]), std::log(upper_[i])));
    }
  }
  return to_internal(ParameterVector(order_, std::move(v)));
}

std::vector<Eigen::VectorXd> ParameterTransform::sample_starts(int count,
                                                               std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<Eigen::VectorXd> starts;
  for (int s = 0; s < count; ++s) starts.push_back(sample_start(rng));
  return starts;
}

// --- problem ----------------------------------------------------------------

EstimationData estimation_data(ModelOrder order, const SimulationTrace& trace) {
  EstimationData data;
  const auto n = static_cast<Eigen::Index>(trace.size());
  data.u = Eigen::Map<const Eigen::VectorXd>(trace.q_hvac.data(), n);
  data.y = Eigen::Map<const Eigen::VectorXd>(trace.y.data(), n);
  data.w = disturbances(order, trace.driving);
  data.t_s = static_cast<double>(trace.driving.step_seconds());
  return data;
}

void EstimationHyperparameters::validate() const {
  bounds.validate();
  if (!(process_variance > 0.0) || !std::isfinite(process_variance)) {
    throw Error(ErrorCode::kSingularCovariance, "process variance must be > 0");
  }
  if (!(measurement_variance > 0.0) || !std::isfinite(measurement_variance)) {
    throw Error(ErrorCode::kInvalidArgument, "measurement variance must be > 0");
  }
  if (!(initial_variance > 0.0) || !std::isfinite(initial_variance)) {
    throw Error(ErrorCode::kSingularCovariance, "initial variance must be > 0");
  }
  if (starts < 1) throw Error(ErrorCode::kInvalidArgument, "starts must be >= 1");
}

void EstimationProblem::validate() const {
  bounds.validate();
  const auto n = static_cast<Eigen::Index>(state_count(order));
  const auto len = static_cast<Eigen::Index>(data.y.size());
  const auto needed = 10 * static_cast<Eigen::Index>(parameter_count(order));
  if (len < needed) {
    throw Error(ErrorCode::kInvalidArgument,
                "training trace has " + std::to_string(len) + " samples, " +
                    std::string(to_string(order)) + " needs at least " +
                    std::to_string(needed));
  }
  if (data.u.size() != len || data.w.rows() != len ||
      data.w.cols() != disturbance_count(order)) {
    throw Error(ErrorCode::kInvalidArgument, "training data shapes disagree");
  }
  if (!data.y.allFinite() || !data.u.allFinite() || !data.w.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "training data contains non-finite values");
  }
  if (!(data.t_s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "t_s must be > 0");
  if (x0.size() != n || p0.rows() != n || p0.cols() != n || q_cov.rows() != n ||
      q_cov.cols() != n) {
    throw Error(ErrorCode::kInvalidArgument, "x0/P0/Q_cov dimensions disagree with order");
  }
  if (!(r_var > 0.0) || !std::isfinite(r_var)) {
    throw Error(ErrorCode::kInvalidArgument, "R_var must be > 0");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (q_cov + q_cov.transpose()));
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    throw Error(ErrorCode::kInvalidArgument, "Q_cov is not positive semidefinite");
  }
  if (initial_guess && initial_guess->order() != order) {
    throw Error(ErrorCode::kOrderMismatch, "initial guess order does not match problem");
  }
}

EstimationProblem make_problem(ModelOrder order, const SimulationTrace& trace,
                               const EstimationHyperparameters& hyper) {
  hyper.validate();
  EstimationProblem problem;
  problem.order = order;
  problem.data = estimation_data(order, trace);
  problem.bounds = hyper.bounds;
  problem.log_transform = hyper.log_transform;
  const int n = state_count(order);
  if (problem.data.y.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty training trace");
  }
  problem.x0 = initial_state(order, problem.data.y[0]);
  problem.p0 = hyper.initial_variance * Eigen::MatrixXd::Identity(n, n);
  problem.q_cov = hyper.process_variance * Eigen::MatrixXd::Identity(n, n);
  problem.r_var = hyper.measurement_variance;
  problem.optimizer = hyper.optimizer;
  problem.validate();
  return problem;
}

// --- NLS --------------------------------------------------------------------

Eigen::MatrixXd rollout(const DiscreteModel& model, const EstimationData& data,
                        const Eigen::VectorXd& x0) {
  const Eigen::Index len = data.y.size();
  const Eigen::MatrixXd g = drive_matrix(model, data);
  const Mat ad = model.Ad;
  Eigen::MatrixXd states(len, x0.size());
  Vec x = x0;
  for (Eigen::Index k = 0; k < len; ++k) {
    states.row(k) = x.transpose();
    x = ad * x + g.col(k);
  }
  return states;
}

double nls_objective(const EstimationProblem& problem, const ParameterVector& theta) {
  const DiscreteModel model = discretize_for(problem, theta);
  const Eigen::MatrixXd g = drive_matrix(model, problem.data);
  const Mat ad = model.Ad;
  const Eigen::RowVectorXd c = model.C;
  Vec x = problem.x0;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < problem.data.y.size(); ++k) {
    const double e = problem.data.y[k] - c.dot(x);
    sum += e * e;
    x = ad * x + g.col(k);
  }
  return std::isfinite(sum) ? sum : kInf;
}

// --- batch estimation ---------------------------------------------------------

SmootherSolution batch_smooth(const DiscreteModel& model, const EstimationData& data,
                              const Eigen::VectorXd& x0_mean, const Eigen::MatrixXd& p0,
                              const Eigen::MatrixXd& q_cov, double r_var) {
  const Eigen::Index len = data.y.size();
  const Eigen::Index n = model.Ad.rows();
  if (len < 1) throw Error(ErrorCode::kInvalidArgument, "empty data");
  if (!(r_var > 0.0)) throw Error(ErrorCode::kInvalidArgument, "R_var must be > 0");

  const Mat p0_inv = spd_inverse(p0, "P0");
  const Mat q_inv = spd_inverse(q_cov, "Q_cov");
  const Mat f = model.Ad;
  const Vec c = model.C.transpose();
  const Eigen::MatrixXd g = drive_matrix(model, data);
  const double r_inv = 1.0 / r_var;

  const Mat ftq = f.transpose() * q_inv;  // -(upper off-diagonal block)
  const Mat ftqf = ftq * f;
  const Mat cct = c * c.transpose() * r_inv;

  // Forward elimination: factor the Schur complements and carry the rhs.
  std::vector<Eigen::LLT<Mat>> factors(static_cast<std::size_t>(len));
  std::vector<Vec> rhs(static_cast<std::size_t>(len));
  const Mat lower = -q_inv * f;  // H_{k,k-1}
  for (Eigen::Index k = 0; k < len; ++k) {
    Mat h = cct;
    Vec b = c * (data.y[k] * r_inv);
    if (k == 0) {
      h += p0_inv;
      b += p0_inv * Vec(x0_mean);
    } else {
      h += q_inv;
      b += q_inv * Vec(g.col(k - 1));
    }
    if (k + 1 < len) {
      h += ftqf;
      b -= ftq * Vec(g.col(k));
    }
    if (k > 0) {
      const auto& prev = factors[static_cast<std::size_t>(k - 1)];
      // M = L H^-1_{k-1}; H_k -= M L', b_k -= M b_{k-1}
      const Mat m = prev.solve(lower.transpose()).transpose();
      h -= m * lower.transpose();
      b -= m * rhs[static_cast<std::size_t>(k - 1)];
    }
    h = 0.5 * (h + h.transpose());
    factors[static_cast<std::size_t>(k)].compute(h);
    if (factors[static_cast<std::size_t>(k)].info() != Eigen::Success) {
      throw Error(ErrorCode::kSingularCovariance, "smoother normal equations are singular");
    }
    rhs[static_cast<std::size_t>(k)] = b;
  }

  SmootherSolution sol;
  sol.states.resize(len, n);
  Vec next = factors.back().solve(rhs.back());
  sol.states.row(len - 1) = next.transpose();
  for (Eigen::Index k = len - 2; k >= 0; --k) {
    const auto i = static_cast<std::size_t>(k);
    next = factors[i].solve(Vec(rhs[i] - lower.transpose() * next));
    sol.states.row(k) = next.transpose();
  }

  const Vec d0 = Vec(sol.states.row(0).transpose()) - Vec(x0_mean);
  double j = d0.dot(p0_inv * d0);
  for (Eigen::Index k = 0; k < len; ++k) {
    const Vec xk = sol.states.row(k).transpose();
    const double v = data.y[k] - c.dot(xk);
    j += v * v * r_inv;
    if (k + 1 < len) {
      const Vec wk = Vec(sol.states.row(k + 1).transpose()) - f * xk - Vec(g.col(k));
      j += wk.dot(q_inv * wk);
    }
  }
  sol.objective = j;
  return sol;
}

double be_objective(const EstimationProblem& problem, const ParameterVector& theta) {
  const DiscreteModel model = discretize_for(problem, theta);
  const double j =
      batch_smooth(model, problem.data, problem.x0, problem.p0, problem.q_cov, problem.r_var)
          .objective;
  return std::isfinite(j) ? j : kInf;
}

// --- MLE --------------------------------------------------------------------

InnovationUpdate innovation_update(const Eigen::MatrixXd& p, const Eigen::RowVectorXd& c,
                                   double r_var) {
  const Eigen::VectorXd pc = p * c.transpose();
  const double s = c.dot(pc) + r_var;
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorCode::kFilterDivergence, "innovation variance is not positive");
  }
  return {s, pc / s};
}

FilterRun kalman_filter(const DiscreteModel& model, const EstimationData& data,
                        const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                        const Eigen::MatrixXd& q_cov, double r_var,
                        bool track_eigenvalues) {
  const Eigen::Index len = data.y.size();
  const Eigen::MatrixXd g = drive_matrix(model, data);
  const Mat ad = model.Ad;
  const Mat q = q_cov;
  const Vec c = model.C.transpose();

  FilterRun run;
  run.innovations.resize(len);
  run.innovation_variances.resize(len);
  run.predicted.resize(len, x0.size());
  run.min_covariance_eigenvalue = kInf;

  Vec x = x0;
  Mat p = p0;
  double nll = 0.0;
  for (Eigen::Index k = 0; k < len; ++k) {
    run.predicted.row(k) = x.transpose();
    const Vec pc = p * c;
    const double s = c.dot(pc) + r_var;
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorCode::kFilterDivergence,
                  "innovation variance " + format_number(s, 6) + " at step " +
                      std::to_string(k));
    }
    const double e = data.y[k] - c.dot(x);
    run.innovations[k] = e;
    run.innovation_variances[k] = s;
    nll += e * e / s + std::log(s);

    const Vec gain = pc / s;
    x = ad * (x + gain * e) + g.col(k);
    p = ad * (p - gain * pc.transpose()) * ad.transpose() + q;
    p = 0.5 * (p + p.transpose());
    if (track_eigenvalues) {
      Eigen::SelfAdjointEigenSolver<Mat> eig(p, Eigen::EigenvaluesOnly);
      run.min_covariance_eigenvalue =
          std::min(run.min_covariance_eigenvalue, eig.eigenvalues().minCoeff());
    }
  }
  if (!std::isfinite(nll)) {
    throw Error(ErrorCode::kFilterDivergence, "non-finite likelihood");
  }
  run.nll = nll;
  return run;
}

double mle_objective(const EstimationProblem& problem, const ParameterVector& theta) {
  const DiscreteModel model = discretize_for(problem, theta);
  return kalman_filter(model, problem.data, problem.x0, problem.p0, problem.q_cov,
                       problem.r_var)
      .nll;
}

double objective(Method method, const EstimationProblem& problem,
                 const ParameterVector& theta) {
  switch (method) {
    case Method::kNls: return nls_objective(problem, theta);
    case Method::kBe: return be_objective(problem, theta);
    case Method::kMle: return mle_objective(problem, theta);
  }
  return kInf;
}

// --- driver -----------------------------------------------------------------

EstimationResult estimate(Method method, const EstimationProblem& problem, int starts,
                          std::uint64_t seed) {
  problem.validate();
  if (starts < 1) throw Error(ErrorCode::kInvalidArgument, "starts must be >= 1");
  if (method == Method::kBe) {
    spd_inverse(problem.q_cov, "Q_cov");
    spd_inverse(problem.p0, "P0");
  }

  const ParameterTransform transform(problem.order, problem.bounds, problem.log_transform);
  std::vector<Eigen::VectorXd> points;
  if (problem.initial_guess) points.push_back(transform.to_internal(*problem.initial_guess));
  const Objective f = [&](const Eigen::VectorXd& z) {
    return objective(method, problem, transform.to_parameters(z));
  };
  const auto wanted = static_cast<std::size_t>(starts);
  Rng rng(derive_seed(seed, "estimate/starts"));
  Eigen::VectorXd candidate;
  for (int draws = 0; points.size() < wanted; ++draws) {
    candidate = transform.sample_start(rng);
    if (draws >= kMaxDrawsPerStart * starts) {
      points.push_back(candidate);
      continue;
    }
    double value = kInf;
    try {
      value = f(candidate);
    } catch (const std::exception&) {
    }
    if (std::isfinite(value)) points.push_back(candidate);
  }
  const MultiStartResult ms = optimize(f, transform.internal_bounds(), points,
                                       problem.optimizer);

  EstimationResult result;
  result.method = method;
  result.theta_hat = transform.to_parameters(ms.best.x);
  result.objective = ms.best.value;
  result.iterations = ms.best.iterations;
  result.evaluations = ms.best.evaluations;
  result.converged = ms.best.converged;
  result.gradient_norm = ms.best.gradient_norm;
  result.gradient_tolerance = ms.best.gradient_tolerance;
  result.start_index = ms.best_index;
  result.starts_attempted = static_cast<int>(ms.runs.size());
  result.starts_converged = ms.converged_count;
  result.config_hash = problem_hash(method, problem, starts, seed);
  return result;
}

EstimationResult estimate_nls(const EstimationProblem& problem, int starts,
                              std::uint64_t seed) {
  return estimate(Method::kNls, problem, starts, seed);
}

EstimationResult estimate_be(const EstimationProblem& problem, int starts,
                             std::uint64_t seed) {
  return estimate(Method::kBe, problem, starts, seed);
}

EstimationResult estimate_mle(const EstimationProblem& problem, int starts,
                              std::uint64_t seed) {
  return estimate(Method::kMle, problem, starts, seed);
}

// --- aggregates -------------------------------------------------------------

Eigen::VectorXd to_aggregates(const ParameterVector& theta) {
  theta.validate();
  const auto& t = theta;
  switch (theta.order()) {
    case ModelOrder::kSM1: {
      Eigen::VectorXd a(4);
      a << 1.0 / (t["R_win"] * t["C_in"]), t["A_ih"] / t["C_in"], t["B_ac"] / t["C_in"],
          t["D_solar"] / t["C_in"];
      return a;
    }
    case ModelOrder::kSM2: {
      Eigen::VectorXd a(6);
      a << 2.0 / (t["R_w"] * t["C_in"]), 1.0 / (t["R_win"] * t["C_in"]),
          t["A_ih"] / t["C_in"], t["B_ac"] / t["C_in"], 2.0 / (t["R_w"] * t["C_w"]),
          t["D_solar"] / t["C_w"];
      return a;
    }
    case ModelOrder::kSM4: {
      Eigen::VectorXd a(11);
      a << 2.0 / (t["R_w"] * t["C_in"]), 1.0 / (t["R_attic"] * t["C_in"]),
          1.0 / (t["R_im"] * t["C_in"]), 1.0 / (t["R_win"] * t["C_in"]),
          t["A_in"] / t["C_in"], t["B_in"] / t["C_in"], 2.0 / (t["R_w"] * t["C_w"]),
          1.0 / (t["R_attic"] * t["C_attic"]), 1.0 / (t["R_roof"] * t["C_attic"]),
          1.0 / (t["R_im"] * t["C_im"]), t["D_im"] / t["C_im"];
      return a;
    }
  }
  return {};
}

const std::vector<std::string>& aggregate_names(ModelOrder order) {
  static const std::vector<std::string> sm1 = {"inv_R_win_C_in", "A_ih_over_C_in",
                                               "B_ac_over_C_in", "D_solar_over_C_in"};
  static const std::vector<std::string> sm2 = {
      "inv_half_R_w_C_in", "inv_R_win_C_in", "A_ih_over_C_in",
      "B_ac_over_C_in",    "inv_half_R_w_C_w", "D_solar_over_C_w"};
  static const std::vector<std::string> sm4 = {
      "inv_half_R_w_C_in", "inv_R_attic_C_in",    "inv_R_im_C_in",
      "inv_R_win_C_in",    "A_in_over_C_in",      "B_in_over_C_in",
      "inv_half_R_w_C_w",  "inv_R_attic_C_attic", "inv_R_roof_C_attic",
      "inv_R_im_C_im",     "D_im_over_C_im"};
  switch (order) {
    case ModelOrder::kSM1: return sm1;
    case ModelOrder::kSM2: return sm2;
    case ModelOrder::kSM4: return sm4;
  }
  return sm1;
}

// --- serialization ----------------------------------------------------------

std::string problem_hash(Method method, const EstimationProblem& problem, int starts,
                         std::uint64_t seed) {
  std::ostringstream os;
  auto put = [&os](double v) { os << format_exact(v) << ','; };
  auto put_all = [&put](const auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) put(m.data()[i]);
  };
  const auto& b = problem.bounds;
  os << to_string(method) << ';' << to_string(problem.order) << ';' << starts << ';'
     << seed << ';' << problem.log_transform << ';';
  for (double v : {b.resistance_lower, b.resistance_upper, b.capacitance_lower,
                   b.capacitance_upper, b.gain_lower, b.gain_upper, problem.r_var,
                   problem.data.t_s}) {
    put(v);
  }
  const auto& o = problem.optimizer;
  for (double v : {o.gradient_tolerance, o.relative_decrease_tolerance,
                   static_cast<double>(o.max_iterations), o.fd_relative_step,
                   o.acceptance_gradient_tolerance}) {
    put(v);
  }
  put_all(problem.x0);
  put_all(problem.p0);
  put_all(problem.q_cov);
  if (problem.initial_guess) put_all(problem.initial_guess->values());
  os << ';';
  put_all(problem.data.u);
  put_all(problem.data.w);
  put_all(problem.data.y);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(os.str())));
  return buf;
}

std::string to_text(const EstimationResult& r) {
  std::ostringstream os;
  const ModelOrder order = r.theta_hat.order();
  os << "method: " << to_string(r.method) << '\n'
     << "order: " << to_string(order) << '\n'
     << "objective: " << format_exact(r.objective) << '\n'
     << "iterations: " << r.iterations << '\n'
     << "evaluations: " << r.evaluations << '\n'
     << "converged: " << (r.converged ? "true" : "false") << '\n'
     << "gradient_norm: " << format_exact(r.gradient_norm) << '\n'
     << "gradient_tolerance: " << format_exact(r.gradient_tolerance) << '\n'
     << "start_index: " << r.start_index << '\n'
     << "starts_attempted: " << r.starts_attempted << '\n'
     << "starts_converged: " << r.starts_converged << '\n'
     << "config_hash: \"" << r.config_hash << "\"\n";
  const auto& names = parameter_names(order);
  for (std::size_t i = 0; i < names.size(); ++i) {
    os << "theta." << names[i] << ": "
       << format_exact(r.theta_hat.values()[static_cast<Eigen::Index>(i)]) << "  # "
       << unit_of(parameter_kind(names[i])) << '\n';
  }
  const Eigen::VectorXd agg = to_aggregates(r.theta_hat);
  const auto& agg_names = aggregate_names(order);
  for (std::size_t i = 0; i < agg_names.size(); ++i) {
    os << "aggregate." << agg_names[i] << ": "
       << format_exact(agg[static_cast<Eigen::Index>(i)]) << '\n';
  }
  return os.str();
}

EstimationResult result_from_text(std::string_view text) {
  try {
    const YAML::Node doc = YAML::Load(std::string(text));
    if (!doc.IsMap()) throw Error(ErrorCode::kConfig, "fit document is not a mapping");
    auto need = [&doc](const char* key) {
      const YAML::Node node = doc[key];
      if (!node) throw Error(ErrorCode::kConfig, std::string("fit document lacks '") + key + "'");
      return node;
    };
    EstimationResult r;
    r.method = parse_method(need("method").as<std::string>());
    const ModelOrder order = parse_model_order(need("order").as<std::string>());
    r.objective = need("objective").as<double>();
    r.iterations = need("iterations").as<int>();
    r.evaluations = doc["evaluations"] ? doc["evaluations"].as<int>() : 0;
    r.converged = need("converged").as<bool>();
    r.gradient_norm = need("gradient_norm").as<double>();
    r.gradient_tolerance = doc["gradient_tolerance"] ? doc["gradient_tolerance"].as<double>() : 0.0;
    r.start_index = need("start_index").as<int>();
    r.starts_attempted = doc["starts_attempted"] ? doc["starts_attempted"].as<int>() : 0;
    r.starts_converged = doc["starts_converged"] ? doc["starts_converged"].as<int>() : 0;
    r.config_hash = doc["config_hash"] ? doc["config_hash"].as<std::string>() : "";
    std::map<std::string, double> theta;
    for (const auto& name : parameter_names(order)) {
      theta[name] = need(("theta." + name).c_str()).as<double>();
    }
    r.theta_hat = ParameterVector::from_map(order, theta);
    return r;
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfig, std::string("fit document: ") + e.what());
  }
}

}  // namespace greybox

// Acceptance suite: one PASS/FAIL line per criterion.
//
// Criteria listed with --allow-fail are still run and reported, but do not
// affect the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fixtures.h"
#include "greybox/config.h"
#include "greybox/error.h"
#include "greybox/estimators.h"
#include "greybox/evaluation.h"
#include "greybox/random.h"
#include "greybox/weather.h"
#include "oracles.h"

namespace greybox {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double max_relative_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return ((got - want).array().abs() / want.array().abs()).maxCoeff();
}

struct Options {
  int jobs = 4;
  std::uint64_t seed = 42;
};

RunConfig sweep_config(const Options& opt, double measurement_std) {
  RunConfig c;
  c.seed = opt.seed;
  c.jobs = opt.jobs;
  c.truth.measurement_std = measurement_std;
  return c;
}

EvaluationMatrix run_sweep(const RunConfig& config) {
  const TruthSetup setup = truth_setup(config, load_driving(config));
  std::map<SetpointClass, SimulationTrace> truth;
  for (SetpointClass sp : kAllSetpointClasses) {
    truth.emplace(sp, generate_truth(setup, setpoint_celsius(sp)));
  }
  return run_matrix(setup, truth, config.estimation, fits_seed(config), matrix_config(config));
}

// --- 1 ---------------------------------------------------------------------

Verdict count_reproduction(const Options& opt) {
  Verdict v;
  const auto t0 = Clock::now();
  const EvaluationMatrix m = run_sweep(sweep_config(opt, 0.05));
  const double elapsed = seconds_since(t0);
  std::map<FitKey, int> per_fit;
  for (const CellResult& c : m.cells) {
    ++per_fit[{c.key.method, c.key.order, c.key.train_season}];
  }
  const bool twelve = std::all_of(per_fit.begin(), per_fit.end(),
                                  [](const auto& kv) { return kv.second == 12; });
  v.require(m.fits.size() == 24, std::to_string(m.fits.size()) + " parameter sets");
  v.require(m.failed_fits() == 0, std::to_string(m.failed_fits()) + " failed fits");
  v.require(per_fit.size() == 24 && twelve, "12 test scenarios per set");
  v.require(m.cells.size() == 288, std::to_string(m.cells.size()) + " cells (" +
                                       std::to_string(m.ok_cells()) + " scored)");
  v.require(elapsed <= 1800.0, fmt("%.1f s with --jobs ", elapsed) + std::to_string(opt.jobs));
  return v;
}

// --- 2 and 3 -----------------------------------------------------------------

struct RecoveryCase {
  testing::SameOrderData data = testing::sm1_summer_data(21, 30);
  Eigen::VectorXd truth = to_aggregates(testing::sm1_truth());
};

double held_out_accuracy(const testing::SameOrderData& data, const ParameterVector& theta) {
  const SimulationTrace& test = data.test;
  const SimulationTrace pred = forward_simulate(
      ModelOrder::kSM1, theta, test.driving, {}, {},
      initial_state(ModelOrder::kSM1, test.y.front()),
      controller_state_at(data.full, ThermostatConfig{}, data.test_begin));
  return mape(test.zone_temperature(), pred.zone_temperature(), 0.0).accuracy;
}

Verdict self_consistency(const RecoveryCase& rc) {
  Verdict v;
  EstimationHyperparameters hyper;
  hyper.process_variance = 1e-6;
  const EstimationProblem problem = make_problem(ModelOrder::kSM1, rc.data.train, hyper);
  for (Method m : kAllMethods) {
    const auto t0 = Clock::now();
    const EstimationResult r = estimate(m, problem, hyper.starts, 1);
    const double elapsed = seconds_since(t0);
    const double err = max_relative_error(to_aggregates(r.theta_hat), rc.truth);
    const double acc = held_out_accuracy(rc.data, r.theta_hat);
    const std::string name(to_string(m));
    v.require(err <= 0.005, name + fmt(" aggregate error %.2e", err));
    v.require(acc >= 99.5, name + fmt(" held-out T_z accuracy %.4f%%", acc));
    v.require(elapsed <= 60.0, name + fmt(" %.1f s", elapsed));
  }
  return v;
}

Verdict noise_robustness(const RecoveryCase& rc) {
  Verdict v;
  EstimationHyperparameters hyper;
  hyper.process_variance = 1e-6;
  const std::map<Method, double> tolerance{
      {Method::kNls, 0.05}, {Method::kBe, 0.02}, {Method::kMle, 0.02}};
  std::map<Method, double> worst;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const SimulationTrace noisy =
        testing::with_noise(rc.data.train, 0.05, derive_seed(s, "acceptance/noise"));
    const EstimationProblem problem = make_problem(ModelOrder::kSM1, noisy, hyper);
    for (Method m : kAllMethods) {
      const EstimationResult r = estimate(m, problem, hyper.starts, s);
      worst[m] = std::max(worst[m], max_relative_error(to_aggregates(r.theta_hat), rc.truth));
    }
  }
  for (Method m : kAllMethods) {
    v.require(worst[m] <= tolerance.at(m),
              std::string(to_string(m)) + fmt(" worst error %.3f%%", 100 * worst[m]) +
                  fmt(" (limit %.0f%%)", 100 * tolerance.at(m)));
  }
  return v;
}

// --- 4 -----------------------------------------------------------------------

Verdict smoother_oracle() {
  Verdict v;
  {
    const SimulationTrace t =
        testing::with_noise(testing::sm1_summer_data(1, 1).train.slice(0, 50), 0.1, 4);
    const EstimationData data = estimation_data(ModelOrder::kSM1, t);
    const DiscreteModel model = discretize(assemble(testing::sm1_truth()), data.t_s);
    const Eigen::VectorXd x0 = initial_state(ModelOrder::kSM1, 21.5);
    const Eigen::MatrixXd p0 = Eigen::MatrixXd::Identity(1, 1);
    const Eigen::MatrixXd q = 1e-3 * Eigen::MatrixXd::Identity(1, 1);
    const double diff = (batch_smooth(model, data, x0, p0, q, 0.01).states -
                         testing::rts_smoother(model, data, x0, p0, q, 0.01))
                            .cwiseAbs()
                            .maxCoeff();
    v.require(diff <= 1e-8, fmt("scalar max diff %.2e K", diff));
  }
  {
    const SimulationTrace clean =
        forward_simulate(ModelOrder::kSM2, testing::sm2_truth(), testing::driving(2), {}, {},
                         initial_state(ModelOrder::kSM2, 22.0));
    const SimulationTrace t = testing::with_noise(clean.slice(0, 50), 0.1, 8);
    const EstimationData data = estimation_data(ModelOrder::kSM2, t);
    const DiscreteModel model = discretize(assemble(testing::sm2_truth()), data.t_s);
    const Eigen::VectorXd x0 = initial_state(ModelOrder::kSM2, 22.3);
    const Eigen::MatrixXd p0 = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd q = 1e-3 * Eigen::MatrixXd::Identity(2, 2);
    const double diff = (batch_smooth(model, data, x0, p0, q, 0.0025).states -
                         testing::rts_smoother(model, data, x0, p0, q, 0.0025))
                            .cwiseAbs()
                            .maxCoeff();
    v.require(diff <= 1e-8, fmt("2-state max diff %.2e K", diff));
  }
  return v;
}

// --- 5 -----------------------------------------------------------------------

Verdict filter_arithmetic(const RecoveryCase& rc) {
  Verdict v;
  const InnovationUpdate u =
      innovation_update(Eigen::MatrixXd::Identity(1, 1), Eigen::RowVectorXd::Ones(1), 1.0);
  v.require(u.s == 2.0 && u.gain[0] == 0.5,
            fmt("S = %g", u.s) + fmt(", gain = %g", u.gain[0]));
  const EstimationProblem problem = make_problem(ModelOrder::kSM1, rc.data.train, {});
  const DiscreteModel model = discretize(assemble(testing::sm1_truth()), problem.data.t_s);
  const FilterRun run =
      kalman_filter(model, problem.data, problem.x0, problem.p0, problem.q_cov, problem.r_var);
  const double rms = std::sqrt(run.innovations.squaredNorm() /
                               static_cast<double>(run.innovations.size()));
  v.require(rms <= 1e-6, fmt("innovation RMS %.2e K", rms));
  return v;
}

// --- 6 -----------------------------------------------------------------------

Verdict metric_correctness() {
  Verdict v;
  const std::vector<double> truth{20, 20};
  const std::vector<double> pred{19, 21};
  const AccuracyScore s = mape(truth, pred, 0.0);
  v.require(std::abs(s.mape - 5.0) <= 1e-12 && std::abs(s.accuracy - 95.0) <= 1e-12,
            fmt("mape %g%%", s.mape) + fmt(", accuracy %g%%", s.accuracy));

  Rng rng(6);
  int sum_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 100);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(1.0, 40.0);
      b[i] = a[i] * (1.0 + 0.2 * rng.normal());
    }
    const AccuracyScore r = mape(a, b, 0.0);
    if (r.accuracy + r.mape != 100.0) ++sum_violations;
  }
  v.require(sum_violations == 0,
            std::to_string(sum_violations) + " of 1000 series break accuracy + mape = 100");

  std::vector<double> p(30 * 144);
  for (double& x : p) x = rng.uniform() < 0.35 ? 4000.0 : 0.0;
  const BinnedSeries bins = aggregate_phvac(p, 600, 3.0);
  const std::vector<double> oracle = testing::brute_force_bins(p, 18);
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(bins.values.size(), oracle.size()); ++i) {
    worst = std::max(worst, std::abs(bins.values[i] - oracle[i]));
  }
  v.require(bins.values.size() == 240 && oracle.size() == 240,
            std::to_string(bins.values.size()) + " bins");
  v.require(worst <= 1e-12, fmt("max bin deviation %.2e W", worst));
  return v;
}

// --- 7 -----------------------------------------------------------------------

Verdict electrical_exactness() {
  Verdict v;
  double worst = 0.0;
  for (double pf : {0.8, 0.9, 0.95, 1.0}) {
    for (double p : {1.0, 1000.0, 2500.0, 12345.678}) {
      const long double expected = static_cast<long double>(p) * testing::reactive_factor(pf);
      const long double got = reactive_power(p, pf);
      const long double rel =
          expected == 0.0L ? std::abs(got) : std::abs(got - expected) / std::abs(expected);
      worst = std::max(worst, static_cast<double>(rel));
    }
  }
  v.require(worst <= 1e-9, fmt("reactive power max relative error %.2e", worst));
  const HouseElectricalParams elec;
  Rng rng(7);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const double q = rng.uniform(-20000.0, 20000.0);
    if (hvac_power(q, elec) != std::abs(q) / elec.cop) ++mismatches;
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " P_HVAC mismatches");
  return v;
}

// --- 8 -----------------------------------------------------------------------

Verdict discretization_guard() {
  Verdict v;
  bool refused = false;
  try {
    discretize(assemble(testing::sm1_truth().with("R_win", 0.01).with("C_in", 1e4)), 600.0);
  } catch (const Error& e) {
    refused = e.code() == ErrorCode::kUnstableDiscretization;
  }
  v.require(refused, "A_d = -5 refused");

  // Scalar decay of a unit deviation with tau = R C = 1e4 s.
  const double tau = 1e4;
  const double c_bound = (std::exp(1.0) - 1.0) / (2.0 * tau);
  const ParameterVector theta = testing::sm1_truth().with("R_win", 0.01).with("C_in", 1e6);
  double worst_ratio = 0.0;
  for (double t_s : {30.0, 60.0, 120.0, 300.0, 600.0}) {
    const DiscreteModel d = discretize(assemble(theta), t_s);
    double x = 1.0;
    double err = 0.0;
    const int steps = static_cast<int>(std::round(tau / t_s));
    for (int k = 1; k <= steps; ++k) {
      x = d.Ad(0, 0) * x;
      err = std::max(err, std::abs(x - std::exp(-k * t_s / tau)));
    }
    worst_ratio = std::max(worst_ratio, err / (c_bound * t_s));
  }
  v.require(worst_ratio <= 1.0, fmt("max error / (C t_s) = %.3f", worst_ratio));
  return v;
}

// --- 9 -----------------------------------------------------------------------

Verdict thermostat_property() {
  Verdict v;
  const std::size_t n = 14 * 144;
  const TimeSeriesTable table = add_exogenous(
      TimeSeriesTable(TimePoint(std::chrono::sys_days(std::chrono::year{2017} / 7 / 1)), 600,
                      {"T_am", "GHI", "P_load"},
                      {std::vector<double>(n, 35.0), std::vector<double>(n, 0.0),
                       std::vector<double>(n, 800.0)}),
      {});
  ThermostatConfig thermo;
  thermo.mode = HvacMode::kCooling;
  const ParameterVector theta = default_sm4_truth();
  const SimulationTrace t = simulate_truth(theta, table, thermo, {}, {0.0, 0.0, 0},
                                           initial_state(ModelOrder::kSM4, 22.0));
  const StateSpaceModel m = assemble(theta);
  const Eigen::MatrixXd w = disturbances(ModelOrder::kSM4, table);
  double eps = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const double rate =
        m.A.row(0).dot(t.states.row(r)) + m.B(0) * t.q_hvac[k] + m.D.row(0).dot(w.row(r));
    eps = std::max(eps, 600.0 * std::abs(rate));
  }
  const double upper = thermo.setpoint + thermo.deadband_half_width;
  const double lower = thermo.setpoint - thermo.deadband_half_width;
  const auto tz = t.zone_temperature();
  const auto first = std::find_if(tz.begin(), tz.end(), [&](double x) { return x > upper; });
  double lo = INFINITY, hi = -INFINITY;
  for (auto it = first; it != tz.end(); ++it) {
    lo = std::min(lo, *it);
    hi = std::max(hi, *it);
  }
  v.require(first != tz.end() && lo >= lower - eps && hi <= upper + eps,
            fmt("post-transient T_z in [%.3f, ", lo) + fmt("%.3f] ", hi) +
                fmt("vs band +/- %.3f K", eps));

  int events = 0;
  int bad = 0;
  int last = -1;
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (t.hvac_on[k] == t.hvac_on[k - 1]) continue;
    ++events;
    const int kind = t.hvac_on[k];
    if (kind == last) ++bad;
    if (kind == 1 && !(tz[k] > upper)) ++bad;
    if (kind == 0 && !(tz[k] < lower)) ++bad;
    last = kind;
  }
  v.require(events >= 10 && bad == 0,
            std::to_string(events) + " switching events, " + std::to_string(bad) +
                " without an opposite-edge crossing");
  return v;
}

// --- 10 ----------------------------------------------------------------------

Verdict robustness_ordering(const Options& opt) {
  Verdict v;
  const EvaluationMatrix m = run_sweep(sweep_config(opt, 0.0));
  std::map<std::pair<FitKey, SetpointClass>, std::map<Season, double>> by_set;
  for (const CellResult& c : m.cells) {
    if (!c.tz) continue;
    by_set[{{c.key.method, c.key.order, c.key.train_season}, c.key.setpoint}]
          [c.key.test_season] = c.tz->accuracy;
  }
  int violations = 0;
  double worst_gap = 0.0;
  for (const auto& [key, scores] : by_set) {
    const auto same = scores.find(key.first.train_season);
    if (same == scores.end()) {
      ++violations;
      continue;
    }
    for (const auto& [season, acc] : scores) {
      if (season != key.first.train_season && acc > same->second) {
        ++violations;
        worst_gap = std::max(worst_gap, acc - same->second);
        break;
      }
    }
  }
  v.require(violations == 0, std::to_string(violations) + " of " +
                                 std::to_string(by_set.size()) +
                                 " (set, setpoint) groups where a cross-season test beats "
                                 "the same-season test" +
                                 fmt(" (largest margin %.3f points)", worst_gap));

  const auto rows = marginal_table(m, Dimension::kSetpoint);
  double tz_lo = INFINITY, tz_hi = -INFINITY, ph_lo = INFINITY, ph_hi = -INFINITY;
  for (const MarginalRow& r : rows) {
    tz_lo = std::min(tz_lo, r.tz_accuracy);
    tz_hi = std::max(tz_hi, r.tz_accuracy);
    ph_lo = std::min(ph_lo, r.phvac_accuracy);
    ph_hi = std::max(ph_hi, r.phvac_accuracy);
  }
  v.require(tz_hi - tz_lo <= ph_hi - ph_lo,
            fmt("setpoint spread T_z %.2f", tz_hi - tz_lo) +
                fmt(" vs P_HVAC %.2f points", ph_hi - ph_lo));
  return v;
}

}  // namespace
}  // namespace greybox

int main(int argc, char** argv) {
  using namespace greybox;
  CLI::App app{"Acceptance criteria 1-10"};
  Options opt;
  std::vector<int> only;
  std::vector<int> allow_fail;
  app.add_option("--jobs", opt.jobs, "Concurrency for the full sweeps")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", opt.seed, "Root seed for the full sweeps");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--allow-fail", allow_fail,
                 "Criteria whose FAIL is reported but does not set the exit status");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  const std::set<int> tolerated(allow_fail.begin(), allow_fail.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  std::optional<RecoveryCase> recovery;
  auto recovery_case = [&]() -> const RecoveryCase& {
    if (!recovery) recovery.emplace();
    return *recovery;
  };

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"count reproduction", [&] { return count_reproduction(opt); }},
      {"self-consistency recovery", [&] { return self_consistency(recovery_case()); }},
      {"noise robustness", [&] { return noise_robustness(recovery_case()); }},
      {"BE smoother oracle", [] { return smoother_oracle(); }},
      {"MLE filter arithmetic", [&] { return filter_arithmetic(recovery_case()); }},
      {"metric correctness", [] { return metric_correctness(); }},
      {"electrical model exactness", [] { return electrical_exactness(); }},
      {"discretization guard", [] { return discretization_guard(); }},
      {"thermostat property", [] { return thermostat_property(); }},
      {"qualitative robustness ordering", [&] { return robustness_ordering(opt); }},
  };

  int blocking_failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted(id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const bool tolerated_fail = !v.pass && tolerated.count(id) > 0;
    if (!v.pass && !tolerated_fail) ++blocking_failures;
    std::printf("criterion %2d %s  %s (%.1f s)%s\n    %s\n", id, v.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), seconds_since(t0),
                tolerated_fail ? " [allowed to fail]" : "", v.detail.c_str());
    std::fflush(stdout);
  }
  return blocking_failures == 0 ? 0 : 1;
}

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "greybox/cli.h"
#include "greybox/error.h"
#include "greybox/estimators.h"
#include "greybox/evaluation.h"
#include "greybox/simulator.h"
#include "greybox/weather.h"

namespace py = pybind11;
using namespace greybox;

namespace {

ParameterVector params(const std::string& order, const std::map<std::string, double>& values) {
  return ParameterVector::from_map(parse_model_order(order), values);
}

std::map<std::string, double> to_map(const ParameterVector& theta) {
  std::map<std::string, double> out;
  const auto& names = parameter_names(theta.order());
  for (std::size_t i = 0; i < names.size(); ++i) {
    out[names[i]] = theta.values()[static_cast<Eigen::Index>(i)];
  }
  return out;
}

py::dict trace_dict(const SimulationTrace& t) {
  py::dict d;
  d["order"] = std::string(to_string(t.order));
  d["states"] = t.states;
  d["y"] = t.y;
  d["hvac_on"] = std::vector<int>(t.hvac_on.begin(), t.hvac_on.end());
  d["q_hvac"] = t.q_hvac;
  d["p_hvac"] = t.p_hvac;
  d["p_total"] = t.p_total;
  d["q_reactive"] = t.q_reactive;
  return d;
}

py::dict score_dict(const AccuracyScore& s) {
  py::dict d;
  d["mape"] = s.mape;
  d["accuracy"] = s.accuracy;
  d["n_points_used"] = s.n_points_used;
  d["excluded_zero_bins"] = s.excluded_zero_bins;
  return d;
}

}  // namespace

PYBIND11_MODULE(_greybox, m) {
  m.doc() = "Grey-box RC thermal model identification";
  m.attr("__version__") = std::string(kVersion);

  static py::exception<Error> error(m, "GreyboxError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object code = py::str(std::string(to_string(e.code())));
      PyErr_SetObject(error.ptr(), py::make_tuple(code, py::str(e.what())).ptr());
    }
  });

  m.def("parameter_names", [](const std::string& order) {
    return parameter_names(parse_model_order(order));
  });
  m.def("default_sm4_truth", [] { return to_map(default_sm4_truth()); });

  m.def(
      "assemble",
      [](const std::string& order, const std::map<std::string, double>& values) {
        const StateSpaceModel s = assemble(params(order, values));
        return py::make_tuple(s.A, s.B, s.D, s.C);
      },
      py::arg("order"), py::arg("params"), "Continuous (A, B, D, C).");
  m.def(
      "discretize",
      [](const std::string& order, const std::map<std::string, double>& values, double t_s,
         bool allow_unstable) {
        const DiscreteModel d = discretize(assemble(params(order, values)), t_s, allow_unstable);
        py::dict out;
        out["Ad"] = d.Ad;
        out["Bd"] = d.Bd;
        out["Dd"] = d.Dd;
        out["C"] = d.C;
        out["spectral_radius"] = d.spectral_radius;
        out["stable"] = d.stable;
        return out;
      },
      py::arg("order"), py::arg("params"), py::arg("t_s"), py::arg("allow_unstable") = false);
  m.def(
      "to_aggregates",
      [](const std::string& order, const std::map<std::string, double>& values) {
        const ParameterVector theta = params(order, values);
        const Eigen::VectorXd a = to_aggregates(theta);
        std::map<std::string, double> out;
        const auto& names = aggregate_names(theta.order());
        for (std::size_t i = 0; i < names.size(); ++i) {
          out[names[i]] = a[static_cast<Eigen::Index>(i)];
        }
        return out;
      },
      py::arg("order"), py::arg("params"));

  m.def("hvac_power",
        [](double q, double cop) { return hvac_power(q, HouseElectricalParams{cop, 0.95}); },
        py::arg("q_hvac"), py::arg("cop") = 3.5);
  m.def("reactive_power", &reactive_power, py::arg("p"), py::arg("power_factor"));

  m.def(
      "mape",
      [](const std::vector<double>& truth, const std::vector<double>& pred, double zero_floor) {
        return score_dict(mape(truth, pred, zero_floor));
      },
      py::arg("truth"), py::arg("pred"), py::arg("zero_floor") = 0.0);
  m.def(
      "aggregate_phvac",
      [](const std::vector<double>& p, std::int64_t step, double bin_hours) {
        return aggregate_phvac(p, step, bin_hours).values;
      },
      py::arg("p_hvac"), py::arg("step_seconds"), py::arg("bin_hours") = 3.0);

  m.def(
      "simulate",
      [](const std::string& order, const std::map<std::string, double>& values, int days,
         std::int64_t step_seconds, std::uint64_t weather_seed, double setpoint,
         double measurement_std, std::uint64_t noise_seed) {
        const TimeSeriesTable table =
            add_exogenous(synthesize_weather(days, step_seconds, {}, weather_seed), {});
        const ParameterVector theta = params(order, values);
        ThermostatConfig thermostat;
        thermostat.setpoint = setpoint;
        const Eigen::VectorXd x0 = initial_state(theta.order(), setpoint);
        SimulationTrace trace =
            theta.order() == ModelOrder::kSM4
                ? simulate_truth(theta, table, thermostat, {},
                                 NoiseConfig{measurement_std, 0.0, noise_seed}, x0)
                : forward_simulate(theta.order(), theta, table, thermostat, {}, x0);
        py::dict d = trace_dict(trace);
        for (const auto& name : table.names()) {
          const auto col = table.column(name);
          d[py::str("in_" + name)] = std::vector<double>(col.begin(), col.end());
        }
        return d;
      },
      py::arg("order"), py::arg("params"), py::arg("days") = 30, py::arg("step_seconds") = 600,
      py::arg("weather_seed") = 0, py::arg("setpoint") = 22.0,
      py::arg("measurement_std") = 0.0, py::arg("noise_seed") = 0,
      "Synthetic-weather run; SM4 uses the truth simulator (with noise), "
      "reduced orders the noiseless forward simulator.");

  m.def(
      "estimate",
      [](const std::string& method, const std::string& order, const Eigen::VectorXd& y,
         const Eigen::VectorXd& u, const Eigen::MatrixXd& w, double t_s, int starts,
         std::uint64_t seed, double process_variance, double measurement_variance,
         double initial_variance) {
        const ModelOrder mo = parse_model_order(order);
        const auto n = static_cast<Eigen::Index>(state_count(mo));
        EstimationProblem problem;
        problem.order = mo;
        problem.data = EstimationData{u, w, y, t_s};
        if (y.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty y");
        problem.x0 = initial_state(mo, y[0]);
        problem.p0 = initial_variance * Eigen::MatrixXd::Identity(n, n);
        problem.q_cov = process_variance * Eigen::MatrixXd::Identity(n, n);
        problem.r_var = measurement_variance;
        EstimationResult r;
        {
          py::gil_scoped_release release;
          r = estimate(parse_method(method), problem, starts, seed);
        }
        py::dict d;
        d["method"] = std::string(to_string(r.method));
        d["theta"] = to_map(r.theta_hat);
        d["objective"] = r.objective;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        d["gradient_norm"] = r.gradient_norm;
        d["start_index"] = r.start_index;
        d["text"] = to_text(r);
        return d;
      },
      py::arg("method"), py::arg("order"), py::arg("y"), py::arg("u"), py::arg("w"),
      py::arg("t_s"), py::arg("starts") = 8, py::arg("seed") = 0,
      py::arg("process_variance") = 1e-4, py::arg("measurement_variance") = 0.0025,
      py::arg("initial_variance") = 1.0,
      "Fit from arrays; w columns follow the disturbance order of `order`.");
  m.def("disturbance_labels", [](const std::string& order) {
    return disturbance_labels(parse_model_order(order));
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"greybox"};
        for (const auto& a : args) argv.push_back(a.c_str());
        py::gil_scoped_release release;
        return run_cli(static_cast<int>(argv.size()), argv.data(), std::cout, std::cerr);
      },
      py::arg("args"));
}

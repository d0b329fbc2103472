#include "greybox/simulator.h"

#include <cmath>
#include <fstream>
#include <string>

#include "greybox/error.h"
#include "greybox/random.h"

namespace greybox {

namespace {

constexpr std::string_view kStatePrefix = "x_";
const std::vector<std::string> kTraceTail = {"y",      "hvac_on", "Q_HVAC",
                                             "P_HVAC", "P",       "Q_reactive"};

struct StepNoise {
  double measurement_std = 0.0;
  double process_std = 0.0;
  std::uint64_t seed = 0;
};

SimulationTrace run(const ParameterVector& theta, const TimeSeriesTable& table,
                    const ThermostatConfig& thermostat,
                    const HouseElectricalParams& elec, const StepNoise& noise,
                    const Eigen::VectorXd& x0,
                    const std::optional<ControllerState>& initial) {
  thermostat.validate();
  elec.validate();
  const ModelOrder order = theta.order();
  const int n_states = state_count(order);
  if (x0.size() != n_states || !x0.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "initial state must have " + std::to_string(n_states) +
                    " finite entries");
  }
  const DiscreteModel model =
      discretize(assemble(theta), static_cast<double>(table.step_seconds()));

  const std::size_t n = table.size();
  const Eigen::MatrixXd w = disturbances(order, table);
  // Column k holds D_d w(k).
  const Eigen::MatrixXd drive = model.Dd * w.transpose();
  const auto p_other = table.column(col::kLoad);

  SimulationTrace trace{order,
                        table,
                        Eigen::MatrixXd(static_cast<Eigen::Index>(n), n_states),
                        std::vector<double>(n),
                        std::vector<std::uint8_t>(n),
                        std::vector<double>(n),
                        std::vector<double>(n),
                        std::vector<double>(n),
                        std::vector<double>(n)};

  Rng measurement_rng(derive_seed(noise.seed, "noise/measurement"));
  Rng process_rng(derive_seed(noise.seed, "noise/process"));
  const double tan_phi = std::tan(std::acos(elec.power_factor));

  Eigen::VectorXd x = x0;
  Eigen::VectorXd next(n_states);
  ControllerState controller =
      initial.value_or(initial_controller_state(thermostat, x0(0)));
  for (std::size_t k = 0; k < n; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const double tz = x(0);
    const double q = thermostat_step(thermostat, controller, tz);
    const bool on = controller.on;

    trace.states.row(row) = x.transpose();
    trace.y[k] = noise.measurement_std > 0.0
                     ? tz + noise.measurement_std * measurement_rng.normal()
                     : tz;
    trace.hvac_on[k] = on ? 1 : 0;
    trace.q_hvac[k] = q;
    trace.p_hvac[k] = hvac_power(q, elec);
    trace.p_total[k] = total_power(trace.p_hvac[k], p_other[k]);
    trace.q_reactive[k] = trace.p_total[k] * tan_phi;

    next.noalias() = model.Ad * x;
    next += model.Bd * q;
    next += drive.col(row);
    if (noise.process_std > 0.0) {
      for (int i = 0; i < n_states; ++i) {
        next(i) += noise.process_std * process_rng.normal();
      }
    }
    x.swap(next);
  }
  return trace;
}

}  // namespace

std::string_view to_string(HvacMode mode) {
  switch (mode) {
    case HvacMode::kCooling: return "cooling";
    case HvacMode::kHeating: return "heating";
    case HvacMode::kAuto: return "auto";
  }
  return "?";
}

HvacMode parse_hvac_mode(std::string_view text) {
  if (text == "cooling") return HvacMode::kCooling;
  if (text == "heating") return HvacMode::kHeating;
  if (text == "auto") return HvacMode::kAuto;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown HVAC mode '" + std::string(text) + "'");
}

void ThermostatConfig::validate() const {
  if (!(deadband_half_width > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "deadband_half_width must be > 0");
  }
  if (!(q_ac_rated > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "Q_AC_rated must be > 0");
  }
  if (!std::isfinite(setpoint)) {
    throw Error(ErrorCode::kInvalidArgument, "setpoint must be finite");
  }
  if (!(changeover_margin >= 0.0) || !std::isfinite(changeover_margin)) {
    throw Error(ErrorCode::kInvalidArgument, "changeover_margin must be >= 0");
  }
}

void NoiseConfig::validate() const {
  if (!(measurement_std >= 0.0) || !(process_std >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise stds must be >= 0");
  }
}

std::vector<double> SimulationTrace::zone_temperature() const {
  std::vector<double> tz(static_cast<std::size_t>(states.rows()));
  for (Eigen::Index k = 0; k < states.rows(); ++k) {
    tz[static_cast<std::size_t>(k)] = states(k, 0);
  }
  return tz;
}

SimulationTrace SimulationTrace::slice(std::size_t begin,
                                       std::size_t count) const {
  auto cut = [&](const auto& v) {
    using V = std::decay_t<decltype(v)>;
    return V(v.begin() + static_cast<std::ptrdiff_t>(begin),
             v.begin() + static_cast<std::ptrdiff_t>(begin + count));
  };
  return {order,
          driving.slice(begin, count),
          states.middleRows(static_cast<Eigen::Index>(begin),
                            static_cast<Eigen::Index>(count)),
          cut(y),
          cut(hvac_on),
          cut(q_hvac),
          cut(p_hvac),
          cut(p_total),
          cut(q_reactive)};
}

ControllerState initial_controller_state(const ThermostatConfig& thermostat,
                                         double tz0) {
  if (thermostat.mode != HvacMode::kAuto) return {false, thermostat.mode};
  return {false, tz0 >= thermostat.setpoint ? HvacMode::kCooling : HvacMode::kHeating};
}

double thermostat_step(const ThermostatConfig& thermostat, ControllerState& state,
                       double tz) {
  const double upper = thermostat.setpoint + thermostat.deadband_half_width;
  const double lower = thermostat.setpoint - thermostat.deadband_half_width;
  if (thermostat.mode == HvacMode::kAuto && !state.on) {
    if (state.active == HvacMode::kCooling && tz < lower - thermostat.changeover_margin) {
      state.active = HvacMode::kHeating;
    } else if (state.active == HvacMode::kHeating &&
               tz > upper + thermostat.changeover_margin) {
      state.active = HvacMode::kCooling;
    }
  }
  const bool cooling = state.active == HvacMode::kCooling;
  if (cooling ? tz > upper : tz < lower) {
    state.on = true;
  } else if (cooling ? tz < lower : tz > upper) {
    state.on = false;
  }
  if (!state.on) return 0.0;
  return cooling ? -thermostat.q_ac_rated : thermostat.q_ac_rated;
}

ControllerState controller_state_at(const SimulationTrace& trace,
                                    const ThermostatConfig& thermostat,
                                    std::size_t row) {
  thermostat.validate();
  if (row >= trace.size()) {
    throw Error(ErrorCode::kOutOfRange, "row " + std::to_string(row) +
                                            " is past the end of the trace");
  }
  const auto tz = trace.states.col(0);
  ControllerState state = initial_controller_state(thermostat, tz(0));
  for (std::size_t k = 0; k < row; ++k) {
    thermostat_step(thermostat, state, tz(static_cast<Eigen::Index>(k)));
    if (state.on != (trace.hvac_on[k] != 0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "thermostat replay disagrees with the recorded hvac_on at row " +
                      std::to_string(k));
    }
  }
  return state;
}

Eigen::VectorXd initial_state(ModelOrder order, double y0) {
  if (!std::isfinite(y0)) {
    throw Error(ErrorCode::kInvalidArgument, "initial temperature not finite");
  }
  return Eigen::VectorXd::Constant(state_count(order), y0);
}

SimulationTrace simulate_truth(const ParameterVector& theta_sm4,
                               const TimeSeriesTable& table,
                               const ThermostatConfig& thermostat,
                               const HouseElectricalParams& elec,
                               const NoiseConfig& noise,
                               const Eigen::VectorXd& x0) {
  if (theta_sm4.order() != ModelOrder::kSM4) {
    throw Error(ErrorCode::kOrderMismatch, "truth simulation needs SM4 parameters");
  }
  noise.validate();
  return run(theta_sm4, table, thermostat, elec,
             {noise.measurement_std, noise.process_std, noise.seed}, x0, std::nullopt);
}

SimulationTrace forward_simulate(ModelOrder order,
                                 const ParameterVector& theta_hat,
                                 const TimeSeriesTable& table,
                                 const ThermostatConfig& thermostat,
                                 const HouseElectricalParams& elec,
                                 const Eigen::VectorXd& x0,
                                 const std::optional<ControllerState>& controller) {
  if (theta_hat.order() != order) {
    throw Error(ErrorCode::kOrderMismatch,
                "parameters are " + std::string(to_string(theta_hat.order())) +
                    ", requested " + std::string(to_string(order)));
  }
  return run(theta_hat, table, thermostat, elec, {}, x0, controller);
}

// --- CSV -------------------------------------------------------------------

void write_trace_csv(const SimulationTrace& trace,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const auto& names = trace.driving.names();
  const auto& states = state_labels(trace.order);
  out << "timestamp";
  for (const auto& name : names) out << ',' << name;
  for (const auto& s : states) out << ',' << kStatePrefix << s;
  for (const auto& t : kTraceTail) out << ',' << t;
  out << '\n';
  std::vector<std::span<const double>> cols;
  for (const auto& name : names) cols.push_back(trace.driving.column(name));
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out << format_iso8601(trace.driving.timestamp(k));
    for (const auto& c : cols) out << ',' << format_exact(c[k]);
    for (Eigen::Index i = 0; i < trace.states.cols(); ++i) {
      out << ',' << format_exact(trace.states(static_cast<Eigen::Index>(k), i));
    }
    out << ',' << format_exact(trace.y[k]) << ','
        << static_cast<int>(trace.hvac_on[k]) << ','
        << format_exact(trace.q_hvac[k]) << ',' << format_exact(trace.p_hvac[k])
        << ',' << format_exact(trace.p_total[k]) << ','
        << format_exact(trace.q_reactive[k]) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

SimulationTrace read_trace_csv(const std::filesystem::path& path) {
  const CsvDocument doc = read_csv_document(path);
  const auto where = [&](std::size_t r) {
    return path.string() + ":" + std::to_string(doc.line_numbers[r]);
  };
  if (doc.rows.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": fewer than 2 rows");
  }
  const auto ts = doc.find("timestamp");
  if (!ts) {
    throw Error(ErrorCode::kMissingColumn, path.string() + ": no timestamp column");
  }
  std::vector<std::size_t> table_cols, state_cols, tail_cols;
  std::vector<std::string> table_names;
  for (const auto& t : kTraceTail) {
    const auto c = doc.find(t);
    if (!c) {
      throw Error(ErrorCode::kMissingColumn,
                  path.string() + ": no column '" + t + "'");
    }
    tail_cols.push_back(*c);
  }
  for (std::size_t c = 0; c < doc.header.size(); ++c) {
    const auto& h = doc.header[c];
    if (c == *ts ||
        std::find(kTraceTail.begin(), kTraceTail.end(), h) != kTraceTail.end()) {
      continue;
    }
    if (h.starts_with(kStatePrefix)) {
      state_cols.push_back(c);
    } else {
      table_cols.push_back(c);
      table_names.push_back(h);
    }
  }
  ModelOrder order;
  switch (state_cols.size()) {
    case 1: order = ModelOrder::kSM1; break;
    case 2: order = ModelOrder::kSM2; break;
    case 4: order = ModelOrder::kSM4; break;
    default:
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ": unexpected number of state columns");
  }

  const std::size_t n = doc.rows.size();
  std::vector<std::vector<double>> table_data(table_cols.size(),
                                              std::vector<double>(n));
  SimulationTrace trace{order,
                        TimeSeriesTable(TimePoint{}, 1, {"_"}, {{0.0, 0.0}}),
                        Eigen::MatrixXd(static_cast<Eigen::Index>(n),
                                        static_cast<Eigen::Index>(state_cols.size())),
                        std::vector<double>(n),
                        std::vector<std::uint8_t>(n),
                        std::vector<double>(n),
                        std::vector<double>(n),
                        std::vector<double>(n),
                        std::vector<double>(n)};
  auto number = [&](std::size_t r, std::size_t c) {
    double v = 0.0;
    if (!parse_csv_number(doc.rows[r][c], v) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument,
                  where(r) + ": bad value '" + doc.rows[r][c] + "' in column '" +
                      doc.header[c] + "'");
    }
    return v;
  };
  TimePoint start{};
  std::int64_t step = 0;
  std::optional<std::size_t> skip;
  for (std::size_t r = 0; r < n; ++r) {
    TimePoint t;
    try {
      t = parse_iso8601(doc.rows[r][*ts]);
    } catch (const Error&) {
      throw Error(ErrorCode::kUnparseableTimestamp,
                  where(r) + ": '" + doc.rows[r][*ts] + "'");
    }
    if (r == 0) {
      start = t;
    } else {
      TimePoint prev = parse_iso8601(doc.rows[r - 1][*ts]);
      std::int64_t d = (t - prev).count();
      if (r == 1) step = d;
      if (d == step + 86400 && !skip) {
        skip = r;
        d = step;
      }
      if (d <= 0 || d != step) {
        throw Error(ErrorCode::kNonMonotonicTime,
                    where(r) + ": irregular timestamp " + doc.rows[r][*ts]);
      }
    }
    for (std::size_t j = 0; j < table_cols.size(); ++j) {
      table_data[j][r] = number(r, table_cols[j]);
    }
    for (std::size_t j = 0; j < state_cols.size(); ++j) {
      trace.states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          number(r, state_cols[j]);
    }
    trace.y[r] = number(r, tail_cols[0]);
    trace.hvac_on[r] = number(r, tail_cols[1]) != 0.0 ? 1 : 0;
    trace.q_hvac[r] = number(r, tail_cols[2]);
    trace.p_hvac[r] = number(r, tail_cols[3]);
    trace.p_total[r] = number(r, tail_cols[4]);
    trace.q_reactive[r] = number(r, tail_cols[5]);
  }
  trace.driving = TimeSeriesTable(start, step, std::move(table_names),
                                  std::move(table_data), skip);
  return trace;
}

}  // namespace greybox

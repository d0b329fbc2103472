#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "greybox/rc_model.h"
#include "greybox/timeseries.h"

namespace greybox {

enum class HvacMode { kCooling, kHeating, kAuto };

std::string_view to_string(HvacMode mode);
HvacMode parse_hvac_mode(std::string_view text);

// Bang-bang thermostat with hysteresis band setpoint +/- deadband_half_width.
//
// kAuto is a changeover thermostat: it keeps one active mode and flips it
// only while idle, when T_z leaves the band on the far side by more than
// changeover_margin. The initial active mode follows the sign of
// T_z - setpoint.
struct ThermostatConfig {
  double setpoint = 22.0;
  double deadband_half_width = 0.5;
  HvacMode mode = HvacMode::kAuto;
  double q_ac_rated = 14000.0;  // W thermal
  double changeover_margin = 0.5;

  void validate() const;
  bool operator==(const ThermostatConfig&) const = default;
};

// Controller memory carried from one step to the next: the hysteresis latch
// and the mode it is acting in (fixed unless the thermostat runs in kAuto).
struct ControllerState {
  bool on = false;
  HvacMode active = HvacMode::kCooling;

  bool operator==(const ControllerState&) const = default;
};

// Memory of a controller that has just been switched on with T_z = tz0.
ControllerState initial_controller_state(const ThermostatConfig& thermostat,
                                         double tz0);

// One control decision: updates `state` from the sensed T_z and returns the
// signed Q_HVAC for the coming step.
double thermostat_step(const ThermostatConfig& thermostat,
                       ControllerState& state, double tz);

struct NoiseConfig {
  double measurement_std = 0.05;  // K, added to the recorded y only
  double process_std = 0.0;       // K per step per state
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const NoiseConfig&) const = default;
};

// Per-step record aligned with the driving table.
struct SimulationTrace {
  ModelOrder order = ModelOrder::kSM1;
  TimeSeriesTable driving;
  Eigen::MatrixXd states;  // N x n_states, T_z in column 0
  std::vector<double> y;   // measured T_z
  std::vector<std::uint8_t> hvac_on;
  std::vector<double> q_hvac;  // W, signed (cooling < 0)
  std::vector<double> p_hvac;  // W
  std::vector<double> p_total;
  std::vector<double> q_reactive;  // var

  std::size_t size() const { return y.size(); }
  std::vector<double> zone_temperature() const;
  SimulationTrace slice(std::size_t begin, std::size_t count) const;
};

// Controller memory entering row `row` of a trace that was recorded from its
// first row under `thermostat`. Found by replaying the control law over the
// noiseless T_z; throws InvalidArgument if the replay disagrees with the
// recorded hvac_on.
ControllerState controller_state_at(const SimulationTrace& trace,
                                    const ThermostatConfig& thermostat,
                                    std::size_t row);

// All states at y0.
Eigen::VectorXd initial_state(ModelOrder order, double y0);

// Ground truth: SM4 stepped with forward Euler under thermostat control.
// The controller acts on the noiseless T_z; noise only touches the record.
SimulationTrace simulate_truth(const ParameterVector& theta_sm4,
                               const TimeSeriesTable& table,
                               const ThermostatConfig& thermostat,
                               const HouseElectricalParams& elec,
                               const NoiseConfig& noise,
                               const Eigen::VectorXd& x0);

// Same stepping and control law for any model order, inputs held over each
// step, states fed back, no noise. Without `controller` the thermostat starts
// from initial_controller_state(thermostat, x0(0)).
SimulationTrace forward_simulate(
    ModelOrder order, const ParameterVector& theta_hat,
    const TimeSeriesTable& table, const ThermostatConfig& thermostat,
    const HouseElectricalParams& elec, const Eigen::VectorXd& x0,
    const std::optional<ControllerState>& controller = std::nullopt);

// CSV columns: timestamp, driving columns, x_<state>..., y, hvac_on, Q_HVAC,
// P_HVAC, P, Q_reactive. Values use 17 significant digits.
void write_trace_csv(const SimulationTrace& trace,
                     const std::filesystem::path& path);
SimulationTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace greybox

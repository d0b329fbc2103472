#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.h"
#include "greybox/error.h"
#include "greybox/simulator.h"
#include "greybox/weather.h"

namespace greybox {
namespace {

TimeSeriesTable constant_weather(int days, double t_am, double ghi, double load) {
  const std::size_t n = static_cast<std::size_t>(days) * 144;
  const TimeSeriesTable raw(
      TimePoint(std::chrono::sys_days(std::chrono::year{2017} / 7 / 1)), 600,
      {"T_am", "GHI", "P_load"},
      {std::vector<double>(n, t_am), std::vector<double>(n, ghi), std::vector<double>(n, load)});
  return add_exogenous(raw, {});
}

ThermostatConfig cooling(double setpoint = 22.0) {
  ThermostatConfig t;
  t.setpoint = setpoint;
  t.mode = HvacMode::kCooling;
  return t;
}

NoiseConfig silent() { return {0.0, 0.0, 0}; }

TEST(InitialState, AllStatesAtY0) {
  EXPECT_EQ(initial_state(ModelOrder::kSM4, 22.0), Eigen::VectorXd::Constant(4, 22.0));
  EXPECT_EQ(initial_state(ModelOrder::kSM1, 22.0), Eigen::VectorXd::Constant(1, 22.0));
}

TEST(SimulateTruth, EquilibriumAtSetpoint) {
  const TimeSeriesTable table = constant_weather(5, 22.0, 0.0, 0.0);
  const SimulationTrace t = simulate_truth(default_sm4_truth(), table, {}, {}, silent(),
                                           initial_state(ModelOrder::kSM4, 22.0));
  ASSERT_EQ(t.size(), table.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    ASSERT_NEAR(t.states(static_cast<Eigen::Index>(k), 0), 22.0, 1e-12);
    ASSERT_EQ(t.hvac_on[k], 0);
    ASSERT_EQ(t.p_hvac[k], 0.0);
  }
}

TEST(SimulateTruth, BandContainmentOnHotConstantWeather) {
  const TimeSeriesTable table = constant_weather(10, 35.0, 0.0, 800.0);
  const ThermostatConfig thermo = cooling();
  const ParameterVector theta = default_sm4_truth();
  const SimulationTrace t = simulate_truth(theta, table, thermo, {}, silent(),
                                           initial_state(ModelOrder::kSM4, 22.0));
  // One Euler step moves T_z by t_s * |dT_z/dt|, evaluated from the
  // continuous model along the trajectory.
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
  const auto first = std::find_if(tz.begin(), tz.end(), [&](double v) { return v > upper; });
  ASSERT_NE(first, tz.end());
  for (auto it = first; it != tz.end(); ++it) {
    ASSERT_LE(*it, upper + eps);
    ASSERT_GE(*it, lower - eps);
  }
}

TEST(SimulateTruth, SwitchingHonoursHysteresis) {
  const TimeSeriesTable table = constant_weather(10, 35.0, 0.0, 800.0);
  const ThermostatConfig thermo = cooling();
  const SimulationTrace t = simulate_truth(default_sm4_truth(), table, thermo, {}, silent(),
                                           initial_state(ModelOrder::kSM4, 22.0));
  const auto tz = t.zone_temperature();
  int events = 0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (t.hvac_on[k] == t.hvac_on[k - 1]) continue;
    ++events;
    if (t.hvac_on[k]) {
      ASSERT_GT(tz[k], thermo.setpoint + thermo.deadband_half_width);
    } else {
      ASSERT_LT(tz[k], thermo.setpoint - thermo.deadband_half_width);
    }
  }
  EXPECT_GT(events, 10);
}

TEST(SimulateTruth, DeterministicWithAndWithoutNoise) {
  const TimeSeriesTable table = testing::driving(20);
  const auto x0 = initial_state(ModelOrder::kSM4, 22.0);
  const auto a = simulate_truth(default_sm4_truth(), table, {}, {}, silent(), x0);
  const auto b = simulate_truth(default_sm4_truth(), table, {}, {}, silent(), x0);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.p_total, b.p_total);
  const NoiseConfig noisy{0.05, 0.01, 77};
  const auto c = simulate_truth(default_sm4_truth(), table, {}, {}, noisy, x0);
  const auto d = simulate_truth(default_sm4_truth(), table, {}, {}, noisy, x0);
  EXPECT_EQ(c.states, d.states);
  EXPECT_EQ(c.y, d.y);
  EXPECT_NE(c.y, a.y);
}

TEST(SimulateTruth, MeasurementNoiseTouchesOnlyRecord) {
  const TimeSeriesTable table = testing::driving(10);
  const auto x0 = initial_state(ModelOrder::kSM4, 22.0);
  const auto clean = simulate_truth(default_sm4_truth(), table, {}, {}, silent(), x0);
  const auto noisy = simulate_truth(default_sm4_truth(), table, {}, {}, {0.05, 0.0, 3}, x0);
  EXPECT_EQ(clean.states, noisy.states);
  EXPECT_EQ(clean.hvac_on, noisy.hvac_on);
  double sq = 0.0;
  for (std::size_t k = 0; k < clean.size(); ++k) sq += std::pow(noisy.y[k] - clean.y[k], 2);
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(clean.size())), 0.05, 0.005);
}

TEST(SimulateTruth, EnergySignFollowsMode) {
  const TimeSeriesTable table = testing::driving(365);
  const auto x0 = initial_state(ModelOrder::kSM4, 22.0);
  ThermostatConfig thermo;
  thermo.mode = HvacMode::kCooling;
  for (double q : simulate_truth(default_sm4_truth(), table, thermo, {}, silent(), x0).q_hvac) {
    ASSERT_LE(q, 0.0);
  }
  thermo.mode = HvacMode::kHeating;
  for (double q : simulate_truth(default_sm4_truth(), table, thermo, {}, silent(), x0).q_hvac) {
    ASSERT_GE(q, 0.0);
  }
}

TEST(SimulateTruth, ElectricalRecordsExact) {
  const TimeSeriesTable table = testing::driving(10);
  HouseElectricalParams elec;
  const auto t = simulate_truth(default_sm4_truth(), table, {}, elec, silent(),
                                initial_state(ModelOrder::kSM4, 22.0));
  const auto load = table.column(col::kLoad);
  const double tan_phi = std::tan(std::acos(elec.power_factor));
  ASSERT_EQ(t.p_total.size(), table.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    ASSERT_EQ(t.p_hvac[k], std::abs(t.q_hvac[k]) / elec.cop);
    ASSERT_EQ(t.p_total[k], t.p_hvac[k] + load[k]);
    ASSERT_EQ(t.q_reactive[k], t.p_total[k] * tan_phi);
  }
}

TEST(SimulateTruth, AutoModeHoldsYearNearSetpoint) {
  const TimeSeriesTable table = testing::driving(365);
  const auto t = simulate_truth(default_sm4_truth(), table, {}, {}, silent(),
                                initial_state(ModelOrder::kSM4, 22.0));
  const auto tz = t.zone_temperature();
  EXPECT_GE(*std::min_element(tz.begin(), tz.end()), 20.0);
  EXPECT_LE(*std::max_element(tz.begin(), tz.end()), 24.0);
}

TEST(ForwardSimulate, Sm4AtTruthReproducesTruth) {
  const TimeSeriesTable table = testing::driving(30);
  const auto x0 = initial_state(ModelOrder::kSM4, 22.0);
  const auto truth = simulate_truth(default_sm4_truth(), table, {}, {}, silent(), x0);
  const auto pred = forward_simulate(ModelOrder::kSM4, default_sm4_truth(), table, {}, {}, x0);
  EXPECT_EQ(truth.states, pred.states);
  EXPECT_EQ(truth.q_hvac, pred.q_hvac);
  EXPECT_EQ(truth.p_total, pred.p_total);
}

TEST(ForwardSimulate, DecoupledActuatorLatchesOn) {
  const TimeSeriesTable table = constant_weather(5, 35.0, 0.0, 800.0);
  const ParameterVector theta = testing::sm1_truth().with("B_ac", 0.0);
  const auto x0 = initial_state(ModelOrder::kSM1, 22.0);
  const auto t = forward_simulate(ModelOrder::kSM1, theta, table, cooling(), {}, x0);
  ThermostatConfig weak = cooling();
  weak.q_ac_rated = 1.0;
  const auto u = forward_simulate(ModelOrder::kSM1, theta, table, weak, {}, x0);
  EXPECT_EQ(t.states, u.states);
  std::size_t first_on = t.size();
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t.hvac_on[k]) {
      first_on = k;
      break;
    }
  }
  ASSERT_LT(first_on, t.size());
  EXPECT_GT(t.states(static_cast<Eigen::Index>(first_on), 0), 22.5);
  for (std::size_t k = first_on; k < t.size(); ++k) ASSERT_EQ(t.hvac_on[k], 1);
}

TEST(ForwardSimulate, RejectsWrongStateSize) {
  const TimeSeriesTable table = testing::driving(2);
  EXPECT_THROW(forward_simulate(ModelOrder::kSM1, testing::sm1_truth(), table, {}, {},
                                initial_state(ModelOrder::kSM2, 22.0)),
               Error);
}

TEST(TraceCsv, RoundTripIsExact) {
  const auto dir = testing::temp_dir("trace_csv");
  const TimeSeriesTable table = testing::driving(3);
  const auto t = simulate_truth(default_sm4_truth(), table, {}, {}, {0.05, 0.0, 9},
                                initial_state(ModelOrder::kSM4, 22.0));
  write_trace_csv(t, dir / "t.csv");
  const SimulationTrace r = read_trace_csv(dir / "t.csv");
  EXPECT_EQ(r.order, ModelOrder::kSM4);
  EXPECT_EQ(r.states, t.states);
  EXPECT_EQ(r.y, t.y);
  EXPECT_EQ(r.hvac_on, t.hvac_on);
  EXPECT_EQ(r.q_hvac, t.q_hvac);
  EXPECT_EQ(r.p_hvac, t.p_hvac);
  EXPECT_EQ(r.p_total, t.p_total);
  EXPECT_EQ(r.q_reactive, t.q_reactive);
  EXPECT_EQ(r.driving, t.driving);
}

TEST(ThermostatConfig, Validation) {
  ThermostatConfig t;
  t.deadband_half_width = 0.0;
  EXPECT_THROW(t.validate(), Error);
  t = {};
  t.q_ac_rated = -1.0;
  EXPECT_THROW(t.validate(), Error);
  EXPECT_EQ(parse_hvac_mode("cooling"), HvacMode::kCooling);
  EXPECT_THROW(parse_hvac_mode("fan"), Error);
}

}  // namespace
}  // namespace greybox

namespace greybox {
namespace {

TEST(ControllerState, ReplayMatchesRecordAndResumesExactly) {
  const TimeSeriesTable table = testing::driving(60);
  const ThermostatConfig thermo;
  const auto x0 = initial_state(ModelOrder::kSM4, 22.0);
  const auto full = simulate_truth(default_sm4_truth(), table, thermo, {}, silent(), x0);
  for (std::size_t begin : {std::size_t{1}, std::size_t{3000}, std::size_t{6001}}) {
    const ControllerState state = controller_state_at(full, thermo, begin);
    const auto tail = full.slice(begin, full.size() - begin);
    const Eigen::VectorXd xb = full.states.row(static_cast<Eigen::Index>(begin)).transpose();
    const auto resumed =
        forward_simulate(ModelOrder::kSM4, default_sm4_truth(), tail.driving, thermo, {}, xb,
                         state);
    EXPECT_EQ(resumed.states, tail.states);
    EXPECT_EQ(resumed.hvac_on, tail.hvac_on);
  }
}

TEST(ControllerState, ReplayRejectsForeignThermostat) {
  const TimeSeriesTable table = testing::driving(30);
  const auto full = simulate_truth(default_sm4_truth(), table, {}, {}, silent(),
                                   initial_state(ModelOrder::kSM4, 22.0));
  ThermostatConfig other;
  other.setpoint = 25.0;
  EXPECT_THROW(controller_state_at(full, other, full.size() - 1), Error);
  EXPECT_THROW(controller_state_at(full, {}, full.size()), Error);
}

TEST(ControllerState, InitialMemory) {
  ThermostatConfig t;
  EXPECT_EQ(initial_controller_state(t, 23.0).active, HvacMode::kCooling);
  EXPECT_EQ(initial_controller_state(t, 21.0).active, HvacMode::kHeating);
  t.mode = HvacMode::kHeating;
  EXPECT_EQ(initial_controller_state(t, 30.0).active, HvacMode::kHeating);
  EXPECT_FALSE(initial_controller_state(t, 30.0).on);
}

}  // namespace
}  // namespace greybox

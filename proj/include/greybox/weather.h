#pragma once

#include <cstdint>

#include "greybox/timeseries.h"

namespace greybox {

// Desk-scale stand-in for a measured weather + household-load year. The
// defaults describe a humid subtropical, cooling-dominated climate.
struct SyntheticWeatherProfile {
  double annual_mean_c = 21.0;
  double seasonal_amplitude_c = 7.0;  // coldest on coldest_day_of_year
  double coldest_day_of_year = 15.0;
  double diurnal_amplitude_c = 5.0;   // warmest at warmest_hour
  double warmest_hour = 15.0;
  double temperature_noise_std_c = 1.0;
  double temperature_noise_timescale_h = 6.0;  // AR(1) correlation time

  double ghi_peak_w_m2 = 850.0;
  double ghi_seasonal_amplitude = 0.25;  // relative, largest at day 172
  double day_length_amplitude_h = 1.5;
  double cloud_attenuation_max = 0.4;    // daily factor in [1 - max, 1]

  double base_load_w = 600.0;
  double morning_peak_w = 700.0;
  double morning_hour = 7.5;
  double morning_width_h = 1.0;
  double evening_peak_w = 1400.0;
  double evening_hour = 19.0;
  double evening_width_h = 2.0;
  double load_noise_std_w = 150.0;

  void validate() const;  // throws InvalidProfile
  bool operator==(const SyntheticWeatherProfile&) const = default;
};

// Columns T_am, GHI, P_load starting at `start` (default 2017-01-01 UTC).
// Bitwise deterministic for a given seed.
TimeSeriesTable synthesize_weather(int year_days, std::int64_t step_seconds,
                                   const SyntheticWeatherProfile& profile,
                                   std::uint64_t seed,
                                   TimePoint start = TimePoint(
                                       std::chrono::sys_days(
                                           std::chrono::year{2017} /
                                           std::chrono::January / 1)));

struct SolAirTemperatures {
  double wall;
  double roof;
};

// T_sol = T_am + alpha * I / h_o; the roof sees GHI, the wall
// GHI * wall_factor.
SolAirTemperatures sol_air_temperatures(double t_am, double ghi,
                                        double absorptivity, double h_o,
                                        double wall_factor = 0.5);

// Conversions from measured columns to model inputs.
struct ExogenousOptions {
  double absorptivity = 0.7;
  double h_o = 22.7;  // W/(m^2 K)
  double wall_factor = 0.5;
  double ihl_fraction = 0.8;       // Q_IHL = fraction * P_load
  double solar_aperture_m2 = 4.0;  // Q_solar = aperture * GHI

  void validate() const;
  bool operator==(const ExogenousOptions&) const = default;
};

// Adds Q_IHL, Q_solar, T_sol_w, T_sol_r computed from T_am, GHI, P_load.
TimeSeriesTable add_exogenous(const TimeSeriesTable& raw,
                              const ExogenousOptions& options);

}  // namespace greybox

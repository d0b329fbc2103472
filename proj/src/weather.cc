#include "greybox/weather.h"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "greybox/error.h"
#include "greybox/random.h"

namespace greybox {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidProfile, what);
}

double bump(double hour, double center, double width) {
  const double z = (hour - center) / width;
  return std::exp(-0.5 * z * z);
}

}  // namespace

void SyntheticWeatherProfile::validate() const {
  require(seasonal_amplitude_c >= 0, "seasonal_amplitude_c < 0");
  require(diurnal_amplitude_c >= 0, "diurnal_amplitude_c < 0");
  require(temperature_noise_std_c >= 0, "temperature_noise_std_c < 0");
  require(temperature_noise_timescale_h > 0,
          "temperature_noise_timescale_h must be > 0");
  require(ghi_peak_w_m2 >= 0, "ghi_peak_w_m2 < 0");
  require(ghi_seasonal_amplitude >= 0 && ghi_seasonal_amplitude <= 1,
          "ghi_seasonal_amplitude outside [0, 1]");
  require(day_length_amplitude_h >= 0 && day_length_amplitude_h < 12,
          "day_length_amplitude_h outside [0, 12)");
  require(cloud_attenuation_max >= 0 && cloud_attenuation_max <= 1,
          "cloud_attenuation_max outside [0, 1]");
  require(base_load_w >= 0 && morning_peak_w >= 0 && evening_peak_w >= 0,
          "negative load amplitude");
  require(morning_width_h > 0 && evening_width_h > 0,
          "load bump widths must be > 0");
  require(load_noise_std_w >= 0, "load_noise_std_w < 0");
}

TimeSeriesTable synthesize_weather(int year_days, std::int64_t step_seconds,
                                   const SyntheticWeatherProfile& profile,
                                   std::uint64_t seed, TimePoint start) {
  profile.validate();
  if (year_days < 1) {
    throw Error(ErrorCode::kInvalidArgument, "year_days must be >= 1");
  }
  if (step_seconds < 60 || 86400 % step_seconds != 0) {
    throw Error(ErrorCode::kIncompatibleStep,
                "step must be >= 60 s and divide one day");
  }
  const auto steps_per_day = static_cast<std::size_t>(86400 / step_seconds);
  const std::size_t n = steps_per_day * static_cast<std::size_t>(year_days);
  const TimePoint year_start{std::chrono::sys_days(
      std::chrono::year{year_of(start)} / std::chrono::January / 1)};

  Rng temperature_rng(derive_seed(seed, "weather/temperature"));
  Rng cloud_rng(derive_seed(seed, "weather/cloud"));
  Rng load_rng(derive_seed(seed, "weather/load"));

  const double rho = std::exp(-static_cast<double>(step_seconds) /
                              (profile.temperature_noise_timescale_h * 3600.0));
  const double innovation = std::sqrt(1.0 - rho * rho);
  double ar_state = profile.temperature_noise_std_c * temperature_rng.normal();

  std::vector<double> t_am(n), ghi(n), load(n);
  double cloud = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double elapsed =
        static_cast<double>((start - year_start).count()) +
        static_cast<double>(k) * static_cast<double>(step_seconds);
    const double doy = elapsed / 86400.0;
    const double hour = std::fmod(elapsed, 86400.0) / 3600.0;

    if (k > 0) {
      ar_state = rho * ar_state +
                 innovation * profile.temperature_noise_std_c *
                     temperature_rng.normal();
    }
    t_am[k] = profile.annual_mean_c -
              profile.seasonal_amplitude_c *
                  std::cos(kTwoPi * (doy - profile.coldest_day_of_year) / 365.0) +
              profile.diurnal_amplitude_c *
                  std::cos(kTwoPi * (hour - profile.warmest_hour) / 24.0) +
              ar_state;

    if (k % steps_per_day == 0) {
      cloud = 1.0 - profile.cloud_attenuation_max * cloud_rng.uniform();
    }
    const double day_length =
        12.0 + profile.day_length_amplitude_h *
                   std::sin(kTwoPi * (doy - 80.0) / 365.0);
    const double sunrise = 12.0 - 0.5 * day_length;
    double irradiance = 0.0;
    if (hour > sunrise && hour < sunrise + day_length) {
      const double scale =
          1.0 + profile.ghi_seasonal_amplitude *
                    std::cos(kTwoPi * (doy - 172.0) / 365.0);
      irradiance = profile.ghi_peak_w_m2 * scale * cloud *
                   std::sin(std::numbers::pi * (hour - sunrise) / day_length);
    }
    ghi[k] = std::max(0.0, irradiance);

    const double l = profile.base_load_w +
                     profile.morning_peak_w *
                         bump(hour, profile.morning_hour, profile.morning_width_h) +
                     profile.evening_peak_w *
                         bump(hour, profile.evening_hour, profile.evening_width_h) +
                     profile.load_noise_std_w * load_rng.normal();
    load[k] = std::max(0.0, l);
  }
  return TimeSeriesTable(
      start, step_seconds,
      {std::string(col::kAmbient), std::string(col::kIrradiance),
       std::string(col::kLoad)},
      {std::move(t_am), std::move(ghi), std::move(load)});
}

SolAirTemperatures sol_air_temperatures(double t_am, double ghi,
                                        double absorptivity, double h_o,
                                        double wall_factor) {
  return {t_am + absorptivity * ghi * wall_factor / h_o,
          t_am + absorptivity * ghi / h_o};
}

void ExogenousOptions::validate() const {
  if (!(absorptivity >= 0 && absorptivity <= 1) || !(h_o > 0) ||
      !(wall_factor >= 0) || !(ihl_fraction >= 0) || !(solar_aperture_m2 >= 0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid exogenous options");
  }
}

TimeSeriesTable add_exogenous(const TimeSeriesTable& raw,
                              const ExogenousOptions& options) {
  options.validate();
  const auto t_am = raw.column(col::kAmbient);
  const auto ghi = raw.column(col::kIrradiance);
  const auto load = raw.column(col::kLoad);
  const std::size_t n = raw.size();
  std::vector<double> q_ihl(n), q_solar(n), t_sol_w(n), t_sol_r(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double irradiance = std::max(0.0, ghi[k]);
    const auto sol = sol_air_temperatures(t_am[k], irradiance, options.absorptivity,
                                          options.h_o, options.wall_factor);
    q_ihl[k] = options.ihl_fraction * load[k];
    q_solar[k] = options.solar_aperture_m2 * irradiance;
    t_sol_w[k] = sol.wall;
    t_sol_r[k] = sol.roof;
  }
  return raw.with_column(std::string(col::kInternalGain), std::move(q_ihl))
      .with_column(std::string(col::kSolarGain), std::move(q_solar))
      .with_column(std::string(col::kSolAirWall), std::move(t_sol_w))
      .with_column(std::string(col::kSolAirRoof), std::move(t_sol_r));
}

}  // namespace greybox

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "greybox/evaluation.h"
#include "greybox/estimators.h"
#include "greybox/rc_model.h"
#include "greybox/simulator.h"
#include "greybox/timeseries.h"
#include "greybox/weather.h"

namespace greybox {

enum class WeatherSource { kSynthetic, kCsv };

struct WeatherConfig {
  WeatherSource source = WeatherSource::kSynthetic;
  std::optional<std::filesystem::path> csv_path;
  CsvSchema schema;
  int days = 365;
  std::int64_t step_seconds = 600;
  int year = 2017;
  SyntheticWeatherProfile profile;
  ExogenousOptions exogenous;

  bool operator==(const WeatherConfig&) const = default;
};

struct TruthConfig {
  ParameterVector theta = default_sm4_truth();
  double measurement_std = 0.05;
  double process_std = 0.0;

  bool operator==(const TruthConfig&) const = default;
};

struct EvaluationConfig {
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::vector<ModelOrder> orders{ModelOrder::kSM1, ModelOrder::kSM2};
  std::vector<Season> train_seasons{std::begin(kAllSeasons), std::end(kAllSeasons)};
  std::vector<Season> test_seasons{std::begin(kAllSeasons), std::end(kAllSeasons)};
  std::vector<SetpointClass> setpoints{std::begin(kAllSetpointClasses),
                                       std::end(kAllSetpointClasses)};
  int train_days = 21;
  int train_offset_days = 0;
  int test_days = 30;
  int test_offset_days = 21;
  double zero_floor_w = 1.0;
  double bin_hours = 3.0;
  bool write_traces = false;

  bool operator==(const EvaluationConfig&) const = default;
};

// Whole-run configuration. Every field has a default except output_dir,
// which may also come from --out-dir.
struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::optional<std::filesystem::path> output_dir;
  WeatherConfig weather;
  TruthConfig truth;
  HouseElectricalParams electrical;
  ThermostatConfig thermostat;  // setpoint is set per run
  EstimationHyperparameters estimation;
  EvaluationConfig evaluation;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Strict YAML reader: unknown keys and malformed values throw Config.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

// Hash of everything that shapes results (output_dir and jobs excluded).
std::string config_hash(const RunConfig& config);

// Per-stage seeds expanded from the root seed.
std::uint64_t weather_seed(const RunConfig& config);
std::uint64_t noise_seed(const RunConfig& config);
std::uint64_t fits_seed(const RunConfig& config);

MatrixConfig matrix_config(const RunConfig& config);

// Driving table (synthetic or ingested) with the exogenous columns added.
TimeSeriesTable load_driving(const RunConfig& config);
TruthSetup truth_setup(const RunConfig& config, TimeSeriesTable driving);

}  // namespace greybox

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "greybox/estimators.h"
#include "greybox/simulator.h"
#include "greybox/timeseries.h"

namespace greybox::testing {

// SM1 house used as a same-order data generator.
ParameterVector sm1_truth();
ParameterVector sm2_truth();

// Synthetic driving data (with exogenous columns) starting 2017-01-01.
TimeSeriesTable driving(int days, std::uint64_t seed = 42);

// Noiseless SM1 run under the default auto thermostat at 22 degC over the
// Summer quarter: `train_days` of training followed by `test_days`.
struct SameOrderData {
  SimulationTrace full;
  SimulationTrace train;
  SimulationTrace test;
  std::size_t test_begin = 0;  // row of `full` where `test` starts
};
SameOrderData sm1_summer_data(int train_days = 21, int test_days = 30);

// Copy of `trace` with N(0, std^2) noise added to y.
SimulationTrace with_noise(const SimulationTrace& trace, double std, std::uint64_t seed);

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace greybox::testing

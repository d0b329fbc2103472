#include "fixtures.h"

#include <fstream>
#include <sstream>

#include "greybox/random.h"
#include "greybox/weather.h"

namespace greybox::testing {

ParameterVector sm1_truth() {
  return ParameterVector::from_map(
      ModelOrder::kSM1,
      {{"R_win", 0.002}, {"C_in", 1.5e7}, {"A_ih", 1.0}, {"B_ac", 1.0}, {"D_solar", 0.5}});
}

ParameterVector sm2_truth() {
  return ParameterVector::from_map(ModelOrder::kSM2, {{"R_w", 0.004},
                                                      {"R_win", 0.004},
                                                      {"C_in", 1.0e7},
                                                      {"C_w", 3.0e7},
                                                      {"A_ih", 1.0},
                                                      {"B_ac", 1.0},
                                                      {"D_solar", 1.0}});
}

TimeSeriesTable driving(int days, std::uint64_t seed) {
  return add_exogenous(synthesize_weather(days, 600, {}, seed), {});
}

SameOrderData sm1_summer_data(int train_days, int test_days) {
  const TimeSeriesTable table = driving(365);
  const SeasonWindow summer = season_window(Season::kSummer, 2017);
  const RowRange rows = window_rows(table, summer, train_days + test_days, 0);
  const TimeSeriesTable span = table.slice(rows.begin, rows.count);
  const SimulationTrace full = forward_simulate(ModelOrder::kSM1, sm1_truth(), span, {}, {},
                                                initial_state(ModelOrder::kSM1, 22.0));
  const std::size_t n_train = static_cast<std::size_t>(train_days) * 144;
  return {full, full.slice(0, n_train), full.slice(n_train, full.size() - n_train), n_train};
}

SimulationTrace with_noise(const SimulationTrace& trace, double std, std::uint64_t seed) {
  SimulationTrace out = trace;
  Rng rng(seed);
  for (double& y : out.y) y += std * rng.normal();
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("greybox_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace greybox::testing

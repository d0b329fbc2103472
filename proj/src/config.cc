#include "greybox/config.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <yaml-cpp/yaml.h>

#include "greybox/error.h"
#include "greybox/random.h"

namespace greybox {

namespace {

template <typename T>
using Fields = std::vector<std::pair<const char*, T>>;

const Fields<double SyntheticWeatherProfile::*>& profile_fields() {
  using P = SyntheticWeatherProfile;
  static const Fields<double P::*> fields = {
      {"annual_mean_c", &P::annual_mean_c},
      {"seasonal_amplitude_c", &P::seasonal_amplitude_c},
      {"coldest_day_of_year", &P::coldest_day_of_year},
      {"diurnal_amplitude_c", &P::diurnal_amplitude_c},
      {"warmest_hour", &P::warmest_hour},
      {"temperature_noise_std_c", &P::temperature_noise_std_c},
      {"temperature_noise_timescale_h", &P::temperature_noise_timescale_h},
      {"ghi_peak_w_m2", &P::ghi_peak_w_m2},
      {"ghi_seasonal_amplitude", &P::ghi_seasonal_amplitude},
      {"day_length_amplitude_h", &P::day_length_amplitude_h},
      {"cloud_attenuation_max", &P::cloud_attenuation_max},
      {"base_load_w", &P::base_load_w},
      {"morning_peak_w", &P::morning_peak_w},
      {"morning_hour", &P::morning_hour},
      {"morning_width_h", &P::morning_width_h},
      {"evening_peak_w", &P::evening_peak_w},
      {"evening_hour", &P::evening_hour},
      {"evening_width_h", &P::evening_width_h},
      {"load_noise_std_w", &P::load_noise_std_w},
  };
  return fields;
}

const Fields<double ExogenousOptions::*>& exogenous_fields() {
  using E = ExogenousOptions;
  static const Fields<double E::*> fields = {
      {"absorptivity", &E::absorptivity},
      {"h_o", &E::h_o},
      {"wall_factor", &E::wall_factor},
      {"ihl_fraction", &E::ihl_fraction},
      {"solar_aperture_m2", &E::solar_aperture_m2},
  };
  return fields;
}

const Fields<double OptimizerOptions::*>& optimizer_fields() {
  using O = OptimizerOptions;
  static const Fields<double O::*> fields = {
      {"gradient_tolerance", &O::gradient_tolerance},
      {"relative_decrease_tolerance", &O::relative_decrease_tolerance},
      {"fd_relative_step", &O::fd_relative_step},
      {"acceptance_gradient_tolerance", &O::acceptance_gradient_tolerance},
  };
  return fields;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kConfig, where + ": " + what);
}

// Rejects keys outside `allowed` in a mapping node.
void check_keys(const YAML::Node& node, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, const std::string& where, T& out) {
  const YAML::Node node = parent[key];
  if (!node) return;
  try {
    out = node.as<T>();
  } catch (const YAML::Exception&) {
    fail(where + "." + key, "malformed value '" + YAML::Dump(node) + "'");
  }
}

template <typename F>
auto read_list(const YAML::Node& parent, const char* key, const std::string& where,
               F parse) {
  using T = decltype(parse(std::string()));
  std::vector<T> values;
  const YAML::Node node = parent[key];
  if (!node) return std::optional<std::vector<T>>();
  if (!node.IsSequence()) fail(where + "." + key, "expected a list");
  for (const auto& item : node) {
    try {
      values.push_back(parse(item.as<std::string>()));
    } catch (const Error& e) {
      fail(where + "." + key, e.what());
    }
  }
  return std::optional<std::vector<T>>(std::move(values));
}

template <typename S, typename T>
void read_fields(const YAML::Node& node, const std::string& where,
                 const Fields<T S::*>& fields, S& out) {
  if (!node) return;
  std::set<std::string> allowed;
  for (const auto& f : fields) allowed.insert(f.first);
  check_keys(node, where, allowed);
  for (const auto& [name, member] : fields) read(node, name, where, out.*member);
}

std::set<std::string> keys(std::initializer_list<const char*> names) {
  return {names.begin(), names.end()};
}

void read_bounds(const YAML::Node& node, const char* key, const std::string& where,
                 double& lower, double& upper) {
  const YAML::Node pair = node[key];
  if (!pair) return;
  if (!pair.IsSequence() || pair.size() != 2) {
    fail(where + "." + key, "expected [lower, upper]");
  }
  try {
    lower = pair[0].as<double>();
    upper = pair[1].as<double>();
  } catch (const YAML::Exception&) {
    fail(where + "." + key, "malformed bound");
  }
}

SetpointClass parse_setpoint_value(const std::string& text) {
  try {
    return parse_setpoint_class(text);
  } catch (const Error&) {
    double v = 0.0;
    if (parse_csv_number(text, v)) {
      for (SetpointClass sp : kAllSetpointClasses) {
        if (setpoint_celsius(sp) == v) return sp;
      }
    }
    throw;
  }
}

}  // namespace

void RunConfig::validate() const {
  if (jobs < 1) throw Error(ErrorCode::kConfig, "jobs must be >= 1");
  if (weather.source == WeatherSource::kCsv && !weather.csv_path) {
    throw Error(ErrorCode::kConfig, "weather.csv_path is required for the csv source");
  }
  if (weather.days < 1 || weather.step_seconds < 60) {
    throw Error(ErrorCode::kConfig, "weather.days must be >= 1 and step_seconds >= 60");
  }
  if (!(weather.schema.max_gap_fraction >= 0.0)) {
    throw Error(ErrorCode::kConfig, "weather.max_gap_fraction must be >= 0");
  }
  try {
    weather.profile.validate();
    weather.exogenous.validate();
    if (truth.theta.order() != ModelOrder::kSM4) {
      throw Error(ErrorCode::kConfig, "truth.theta must be an SM4 parameter set");
    }
    truth.theta.validate();
    NoiseConfig{truth.measurement_std, truth.process_std, 0}.validate();
    electrical.validate();
    thermostat.validate();
    estimation.validate();
    matrix_config(*this).validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, e.what());
  }
}

RunConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid YAML: ") + e.what());
  }
  RunConfig c;
  if (root.IsNull()) {
    c.validate();
    return c;
  }
  check_keys(root, "config",
             keys({"seed", "jobs", "output_dir", "weather", "truth", "electrical", "thermostat",
                   "estimation", "evaluation"}));
  read(root, "seed", "config", c.seed);
  read(root, "jobs", "config", c.jobs);
  if (root["output_dir"]) {
    std::string dir;
    read(root, "output_dir", "config", dir);
    c.output_dir = dir;
  }

  if (const YAML::Node w = root["weather"]) {
    const std::string where = "weather";
    check_keys(w, where,
               keys({"source", "csv_path", "timestamp_column", "columns", "max_gap_fraction",
                     "days", "step_seconds", "year", "profile", "exogenous"}));
    if (w["source"]) {
      std::string source;
      read(w, "source", where, source);
      if (source == "synthetic") {
        c.weather.source = WeatherSource::kSynthetic;
      } else if (source == "csv") {
        c.weather.source = WeatherSource::kCsv;
      } else {
        fail(where + ".source", "expected 'synthetic' or 'csv'");
      }
    }
    if (w["csv_path"]) {
      std::string path;
      read(w, "csv_path", where, path);
      c.weather.csv_path = path;
    }
    read(w, "timestamp_column", where, c.weather.schema.timestamp);
    if (const YAML::Node cols = w["columns"]) {
      std::set<std::string> allowed;
      for (const auto& [internal, header] : c.weather.schema.columns) allowed.insert(internal);
      check_keys(cols, where + ".columns", allowed);
      for (auto& [internal, header] : c.weather.schema.columns) {
        read(cols, internal.c_str(), where + ".columns", header);
      }
    }
    read(w, "max_gap_fraction", where, c.weather.schema.max_gap_fraction);
    read(w, "days", where, c.weather.days);
    read(w, "step_seconds", where, c.weather.step_seconds);
    read(w, "year", where, c.weather.year);
    read_fields(w["profile"], where + ".profile", profile_fields(), c.weather.profile);
    read_fields(w["exogenous"], where + ".exogenous", exogenous_fields(), c.weather.exogenous);
  }

  if (const YAML::Node t = root["truth"]) {
    const std::string where = "truth";
    check_keys(t, where, keys({"theta", "measurement_std", "process_std"}));
    if (const YAML::Node theta = t["theta"]) {
      std::set<std::string> allowed;
      for (const auto& name : parameter_names(ModelOrder::kSM4)) allowed.insert(name);
      check_keys(theta, where + ".theta", allowed);
      Eigen::VectorXd values = c.truth.theta.values();
      const auto& names = parameter_names(ModelOrder::kSM4);
      for (std::size_t i = 0; i < names.size(); ++i) {
        read(theta, names[i].c_str(), where + ".theta", values[static_cast<Eigen::Index>(i)]);
      }
      c.truth.theta = ParameterVector(ModelOrder::kSM4, values);
    }
    read(t, "measurement_std", where, c.truth.measurement_std);
    read(t, "process_std", where, c.truth.process_std);
  }

  if (const YAML::Node e = root["electrical"]) {
    check_keys(e, "electrical", keys({"cop", "power_factor"}));
    read(e, "cop", "electrical", c.electrical.cop);
    read(e, "power_factor", "electrical", c.electrical.power_factor);
  }

  if (const YAML::Node t = root["thermostat"]) {
    const std::string where = "thermostat";
    check_keys(t, where,
               keys({"deadband_half_width", "mode", "q_ac_rated", "changeover_margin"}));
    read(t, "deadband_half_width", where, c.thermostat.deadband_half_width);
    read(t, "q_ac_rated", where, c.thermostat.q_ac_rated);
    read(t, "changeover_margin", where, c.thermostat.changeover_margin);
    if (t["mode"]) {
      std::string mode;
      read(t, "mode", where, mode);
      try {
        c.thermostat.mode = parse_hvac_mode(mode);
      } catch (const Error& err) {
        fail(where + ".mode", err.what());
      }
    }
  }

  if (const YAML::Node e = root["estimation"]) {
    const std::string where = "estimation";
    auto& h = c.estimation;
    check_keys(e, where,
               keys({"process_variance", "measurement_variance", "initial_variance",
                     "log_transform", "starts", "bounds", "optimizer"}));
    read(e, "process_variance", where, h.process_variance);
    read(e, "measurement_variance", where, h.measurement_variance);
    read(e, "initial_variance", where, h.initial_variance);
    read(e, "log_transform", where, h.log_transform);
    read(e, "starts", where, h.starts);
    if (const YAML::Node b = e["bounds"]) {
      check_keys(b, where + ".bounds", keys({"resistance", "capacitance", "gain"}));
      read_bounds(b, "resistance", where + ".bounds", h.bounds.resistance_lower,
                  h.bounds.resistance_upper);
      read_bounds(b, "capacitance", where + ".bounds", h.bounds.capacitance_lower,
                  h.bounds.capacitance_upper);
      read_bounds(b, "gain", where + ".bounds", h.bounds.gain_lower, h.bounds.gain_upper);
    }
    if (const YAML::Node o = e["optimizer"]) {
      std::set<std::string> allowed{"max_iterations"};
      for (const auto& f : optimizer_fields()) allowed.insert(f.first);
      check_keys(o, where + ".optimizer", allowed);
      for (const auto& [name, member] : optimizer_fields()) {
        read(o, name, where + ".optimizer", h.optimizer.*member);
      }
      read(o, "max_iterations", where + ".optimizer", h.optimizer.max_iterations);
    }
  }

  if (const YAML::Node e = root["evaluation"]) {
    const std::string where = "evaluation";
    auto& v = c.evaluation;
    check_keys(e, where,
               keys({"methods", "orders", "train_seasons", "test_seasons", "setpoints",
                     "train_days", "train_offset_days", "test_days", "test_offset_days",
                     "zero_floor_w", "bin_hours", "write_traces"}));
    if (auto l = read_list(e, "methods", where,
                           [](const std::string& s) { return parse_method(s); })) {
      v.methods = *l;
    }
    if (auto l = read_list(e, "orders", where,
                           [](const std::string& s) { return parse_model_order(s); })) {
      v.orders = *l;
    }
    if (auto l = read_list(e, "train_seasons", where,
                           [](const std::string& s) { return parse_season(s); })) {
      v.train_seasons = *l;
    }
    if (auto l = read_list(e, "test_seasons", where,
                           [](const std::string& s) { return parse_season(s); })) {
      v.test_seasons = *l;
    }
    if (auto l = read_list(e, "setpoints", where, parse_setpoint_value)) v.setpoints = *l;
    read(e, "train_days", where, v.train_days);
    read(e, "train_offset_days", where, v.train_offset_days);
    read(e, "test_days", where, v.test_days);
    read(e, "test_offset_days", where, v.test_offset_days);
    read(e, "zero_floor_w", where, v.zero_floor_w);
    read(e, "bin_hours", where, v.bin_hours);
    read(e, "write_traces", where, v.write_traces);
  }

  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& c) {
  YAML::Emitter out;
  auto num = [](double v) { return format_exact(v); };
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "jobs" << YAML::Value << c.jobs;
  if (c.output_dir) {
    out << YAML::Key << "output_dir" << YAML::Value << YAML::DoubleQuoted
        << c.output_dir->string();
  }

  out << YAML::Key << "weather" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "source" << YAML::Value
      << (c.weather.source == WeatherSource::kCsv ? "csv" : "synthetic");
  if (c.weather.csv_path) {
    out << YAML::Key << "csv_path" << YAML::Value << YAML::DoubleQuoted
        << c.weather.csv_path->string();
  }
  out << YAML::Key << "timestamp_column" << YAML::Value << YAML::DoubleQuoted
      << c.weather.schema.timestamp;
  out << YAML::Key << "columns" << YAML::Value << YAML::BeginMap;
  for (const auto& [internal, header] : c.weather.schema.columns) {
    out << YAML::Key << internal << YAML::Value << YAML::DoubleQuoted << header;
  }
  out << YAML::EndMap;
  out << YAML::Key << "max_gap_fraction" << YAML::Value << num(c.weather.schema.max_gap_fraction);
  out << YAML::Key << "days" << YAML::Value << c.weather.days;
  out << YAML::Key << "step_seconds" << YAML::Value << c.weather.step_seconds;
  out << YAML::Key << "year" << YAML::Value << c.weather.year;
  out << YAML::Key << "profile" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, member] : profile_fields()) {
    out << YAML::Key << name << YAML::Value << num(c.weather.profile.*member);
  }
  out << YAML::EndMap;
  out << YAML::Key << "exogenous" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, member] : exogenous_fields()) {
    out << YAML::Key << name << YAML::Value << num(c.weather.exogenous.*member);
  }
  out << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "truth" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "theta" << YAML::Value << YAML::BeginMap;
  const auto& names = parameter_names(c.truth.theta.order());
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << YAML::Key << names[i] << YAML::Value
        << num(c.truth.theta.values()[static_cast<Eigen::Index>(i)]);
  }
  out << YAML::EndMap;
  out << YAML::Key << "measurement_std" << YAML::Value << num(c.truth.measurement_std);
  out << YAML::Key << "process_std" << YAML::Value << num(c.truth.process_std);
  out << YAML::EndMap;

  out << YAML::Key << "electrical" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "cop" << YAML::Value << num(c.electrical.cop);
  out << YAML::Key << "power_factor" << YAML::Value << num(c.electrical.power_factor);
  out << YAML::EndMap;

  out << YAML::Key << "thermostat" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "deadband_half_width" << YAML::Value
      << num(c.thermostat.deadband_half_width);
  out << YAML::Key << "mode" << YAML::Value << std::string(to_string(c.thermostat.mode));
  out << YAML::Key << "q_ac_rated" << YAML::Value << num(c.thermostat.q_ac_rated);
  out << YAML::Key << "changeover_margin" << YAML::Value << num(c.thermostat.changeover_margin);
  out << YAML::EndMap;

  const auto& h = c.estimation;
  out << YAML::Key << "estimation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "process_variance" << YAML::Value << num(h.process_variance);
  out << YAML::Key << "measurement_variance" << YAML::Value << num(h.measurement_variance);
  out << YAML::Key << "initial_variance" << YAML::Value << num(h.initial_variance);
  out << YAML::Key << "log_transform" << YAML::Value << h.log_transform;
  out << YAML::Key << "starts" << YAML::Value << h.starts;
  out << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
  auto bound = [&](const char* key, double lo, double hi) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << num(lo)
        << num(hi) << YAML::EndSeq;
  };
  bound("resistance", h.bounds.resistance_lower, h.bounds.resistance_upper);
  bound("capacitance", h.bounds.capacitance_lower, h.bounds.capacitance_upper);
  bound("gain", h.bounds.gain_lower, h.bounds.gain_upper);
  out << YAML::EndMap;
  out << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, member] : optimizer_fields()) {
    out << YAML::Key << name << YAML::Value << num(h.optimizer.*member);
  }
  out << YAML::Key << "max_iterations" << YAML::Value << h.optimizer.max_iterations;
  out << YAML::EndMap << YAML::EndMap;

  const auto& v = c.evaluation;
  out << YAML::Key << "evaluation" << YAML::Value << YAML::BeginMap;
  auto list = [&](const char* key, const auto& items, auto name) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& item : items) out << name(item);
    out << YAML::EndSeq;
  };
  list("methods", v.methods, [](Method m) { return std::string(to_string(m)); });
  list("orders", v.orders, [](ModelOrder o) { return std::string(to_string(o)); });
  list("train_seasons", v.train_seasons, [](Season s) { return std::string(to_string(s)); });
  list("test_seasons", v.test_seasons, [](Season s) { return std::string(to_string(s)); });
  list("setpoints", v.setpoints,
       [](SetpointClass sp) { return format_exact(setpoint_celsius(sp)); });
  out << YAML::Key << "train_days" << YAML::Value << v.train_days;
  out << YAML::Key << "train_offset_days" << YAML::Value << v.train_offset_days;
  out << YAML::Key << "test_days" << YAML::Value << v.test_days;
  out << YAML::Key << "test_offset_days" << YAML::Value << v.test_offset_days;
  out << YAML::Key << "zero_floor_w" << YAML::Value << num(v.zero_floor_w);
  out << YAML::Key << "bin_hours" << YAML::Value << num(v.bin_hours);
  out << YAML::Key << "write_traces" << YAML::Value << v.write_traces;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& config) {
  RunConfig canonical = config;
  canonical.output_dir.reset();
  canonical.jobs = 1;
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize_config(canonical))));
  return buf;
}

std::uint64_t weather_seed(const RunConfig& config) {
  return derive_seed(config.seed, "weather");
}

std::uint64_t noise_seed(const RunConfig& config) {
  return derive_seed(config.seed, "truth/noise");
}

std::uint64_t fits_seed(const RunConfig& config) { return derive_seed(config.seed, "fits"); }

MatrixConfig matrix_config(const RunConfig& config) {
  MatrixConfig m;
  const auto& v = config.evaluation;
  m.methods = v.methods;
  m.orders = v.orders;
  m.train_seasons = v.train_seasons;
  m.test_seasons = v.test_seasons;
  m.setpoints = v.setpoints;
  m.train_days = v.train_days;
  m.train_offset_days = v.train_offset_days;
  m.test_days = v.test_days;
  m.test_offset_days = v.test_offset_days;
  m.zero_floor_w = v.zero_floor_w;
  m.bin_hours = v.bin_hours;
  m.jobs = config.jobs;
  return m;
}

TimeSeriesTable load_driving(const RunConfig& config) {
  const WeatherConfig& w = config.weather;
  TimeSeriesTable raw = [&] {
    if (w.source == WeatherSource::kCsv) {
      TimeSeriesTable t = ingest_csv(*w.csv_path, w.schema);
      return t.step_seconds() == w.step_seconds ? t : resample(t, w.step_seconds);
    }
    const TimePoint start{std::chrono::sys_days(std::chrono::year{w.year} /
                                                std::chrono::January / 1)};
    return synthesize_weather(w.days, w.step_seconds, w.profile, weather_seed(config), start);
  }();
  return add_exogenous(raw, w.exogenous);
}

TruthSetup truth_setup(const RunConfig& config, TimeSeriesTable driving) {
  return TruthSetup{std::move(driving), config.truth.theta, config.thermostat,
                    config.electrical,
                    NoiseConfig{config.truth.measurement_std, config.truth.process_std,
                                noise_seed(config)}};
}

}  // namespace greybox

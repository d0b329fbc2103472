#include "greybox/cli.h"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "greybox/config.h"
#include "greybox/error.h"
#include "greybox/evaluation.h"
#include "greybox/random.h"

namespace greybox {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;

  std::vector<std::string> methods;
  std::vector<std::string> orders;
  std::vector<std::string> seasons;
  std::vector<std::string> train_seasons;
  std::vector<std::string> test_seasons;
  std::vector<std::string> setpoints;
  std::string truth_file;
  bool traces = false;

  std::string result_file;
  std::string season;
  std::string setpoint;
  std::optional<int> days;
  std::optional<int> offset_days;
  std::string order;
  std::string output;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string setpoint_tag(SetpointClass sp) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(setpoint_celsius(sp)));
  return buf;
}

// Records wall-times and produced files, then writes manifest.json.
class Run {
 public:
  Run(std::string command, RunConfig config)
      : command_(std::move(command)), config_(std::move(config)) {}

  const RunConfig& config() const { return config_; }
  fs::path dir() const { return *config_.output_dir; }

  template <typename F>
  auto stage(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      stages_.push_back(
          {name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    };
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto result = body();
      finish();
      return result;
    }
  }

  void produced(const fs::path& path) { files_.push_back(path); }
  void failure(std::string message) { failures_.push_back(std::move(message)); }
  const std::vector<std::string>& failures() const { return failures_; }

  void prepare_dir() const { fs::create_directories(dir()); }

  void write_text(const fs::path& name, const std::string& text) {
    const fs::path path = dir() / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    out << text;
    produced(path);
  }

  void write_manifest() {
    nlohmann::ordered_json j;
    j["tool"] = "greybox";
    j["version"] = std::string(kVersion);
    j["command"] = command_;
    j["config_hash"] = config_hash(config_);
    j["seeds"] = {{"root", config_.seed},
                  {"weather", weather_seed(config_)},
                  {"truth_noise", noise_seed(config_)},
                  {"fits", fits_seed(config_)}};
    j["stages"] = nlohmann::ordered_json::array();
    for (const auto& [name, seconds] : stages_) {
      j["stages"].push_back({{"name", name}, {"seconds", seconds}});
    }
    j["files"] = nlohmann::ordered_json::array();
    for (const auto& path : files_) {
      const std::string bytes = slurp(path);
      char digest[24];
      std::snprintf(digest, sizeof digest, "%016llx",
                    static_cast<unsigned long long>(fnv1a64(bytes)));
      j["files"].push_back({{"path", fs::relative(path, dir()).generic_string()},
                            {"bytes", bytes.size()},
                            {"fnv1a64", std::string(digest)}});
    }
    j["failures"] = failures_;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["created_utc"] = std::string(stamp);
    std::ofstream out(dir() / "manifest.json", std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write manifest.json");
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  RunConfig config_;
  std::vector<std::pair<std::string, double>> stages_;
  std::vector<fs::path> files_;
  std::vector<std::string> failures_;
};

template <typename T, typename F>
std::vector<T> parse_all(const std::vector<std::string>& items, F parse) {
  std::vector<T> out;
  for (const auto& item : items) out.push_back(parse(item));
  return out;
}

RunConfig resolve_config(const Options& opt) {
  RunConfig config;
  if (!opt.config_path.empty()) config = load_config(opt.config_path);
  if (!opt.out_dir.empty()) config.output_dir = opt.out_dir;
  if (opt.seed) config.seed = *opt.seed;
  if (opt.jobs) config.jobs = *opt.jobs;
  auto& e = config.evaluation;
  try {
    if (!opt.methods.empty()) e.methods = parse_all<Method>(opt.methods, parse_method);
    if (!opt.orders.empty()) e.orders = parse_all<ModelOrder>(opt.orders, parse_model_order);
    if (!opt.seasons.empty()) e.train_seasons = parse_all<Season>(opt.seasons, parse_season);
    if (!opt.train_seasons.empty()) {
      e.train_seasons = parse_all<Season>(opt.train_seasons, parse_season);
    }
    if (!opt.test_seasons.empty()) {
      e.test_seasons = parse_all<Season>(opt.test_seasons, parse_season);
    }
    if (!opt.setpoints.empty()) {
      e.setpoints = parse_all<SetpointClass>(opt.setpoints, parse_setpoint_class);
    }
  } catch (const Error& err) {
    throw Error(ErrorCode::kConfig, err.what());
  }
  if (opt.traces) e.write_traces = true;
  if (!config.output_dir) {
    throw Error(ErrorCode::kConfig, "no output directory (set output_dir or pass --out-dir)");
  }
  config.validate();
  return config;
}

// Lazily loaded inputs shared by the commands.
class Inputs {
 public:
  explicit Inputs(Run& run) : run_(run) {}

  const TruthSetup& setup() {
    if (!setup_) {
      setup_ = run_.stage("driving", [&] {
        return truth_setup(run_.config(), load_driving(run_.config()));
      });
    }
    return *setup_;
  }

  // Reads truth_spNN.csv from the output directory when present.
  const SimulationTrace& truth(SetpointClass sp, const std::string& override_file = "") {
    auto found = truth_.find(sp);
    if (found != truth_.end()) return found->second;
    const fs::path file = override_file.empty()
                              ? run_.dir() / ("truth_sp" + setpoint_tag(sp) + ".csv")
                              : fs::path(override_file);
    SimulationTrace trace = run_.stage("truth_sp" + setpoint_tag(sp), [&] {
      if (!override_file.empty() || fs::exists(file)) return read_trace_csv(file);
      return generate_truth(setup(), setpoint_celsius(sp));
    });
    return truth_.emplace(sp, std::move(trace)).first->second;
  }

 private:
  Run& run_;
  std::optional<TruthSetup> setup_;
  std::map<SetpointClass, SimulationTrace> truth_;
};

std::string fit_file_name(const FitKey& key) { return "fit_" + key.label() + ".yaml"; }

std::vector<FitKey> requested_fits(const RunConfig& config) {
  std::vector<FitKey> keys;
  for (Method m : config.evaluation.methods) {
    for (ModelOrder o : config.evaluation.orders) {
      for (Season s : config.evaluation.train_seasons) keys.push_back({m, o, s});
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

int finish(Run& run, std::ostream& out) {
  run.write_manifest();
  for (const auto& f : run.failures()) out << "failed: " << f << '\n';
  return run.failures().empty() ? kExitOk : kExitFailures;
}

// --- commands -----------------------------------------------------------------

int cmd_generate(Run& run, std::ostream& out) {
  Inputs inputs(run);
  const auto& setpoints = run.config().evaluation.setpoints;
  std::vector<std::pair<SetpointClass, SimulationTrace>> traces;
  for (SetpointClass sp : setpoints) {
    traces.emplace_back(sp, run.stage("truth_sp" + setpoint_tag(sp), [&] {
      return generate_truth(inputs.setup(), setpoint_celsius(sp));
    }));
  }
  run.prepare_dir();
  run.write_text("config.resolved.yaml", serialize_config(run.config()));
  for (const auto& [sp, trace] : traces) {
    const fs::path path = run.dir() / ("truth_sp" + setpoint_tag(sp) + ".csv");
    run.stage("write_" + path.filename().string(), [&] { write_trace_csv(trace, path); });
    run.produced(path);
    out << "wrote " << path.string() << " (" << trace.size() << " rows)\n";
  }
  return finish(run, out);
}

int cmd_estimate(Run& run, const Options& opt, std::ostream& out) {
  Inputs inputs(run);
  const SimulationTrace& truth = inputs.truth(SetpointClass::kNormal, opt.truth_file);
  const MatrixConfig mc = matrix_config(run.config());
  std::vector<FitRecord> fits;
  for (const FitKey& key : requested_fits(run.config())) {
    fits.push_back(run.stage("fit_" + key.label(), [&] {
      return run_fit(key, truth, run.config().estimation, fits_seed(run.config()), mc);
    }));
  }
  run.prepare_dir();
  run.write_text("config.resolved.yaml", serialize_config(run.config()));
  for (const FitRecord& f : fits) {
    if (!f.result) {
      run.failure(f.key.label() + ": " + f.error);
      continue;
    }
    run.write_text(fit_file_name(f.key), to_text(*f.result));
    out << "wrote " << (run.dir() / fit_file_name(f.key)).string() << '\n';
  }
  return finish(run, out);
}

int cmd_forward_sim(Run& run, const Options& opt, std::ostream& out) {
  const fs::path result_path = opt.result_file;
  const EstimationResult result = result_from_text(slurp(result_path));
  const ModelOrder order = result.theta_hat.order();
  if (!opt.order.empty() && parse_model_order(opt.order) != order) {
    throw Error(ErrorCode::kOrderMismatch, "--order " + opt.order + " but " +
                                               result_path.string() + " holds an " +
                                               std::string(to_string(order)) + " fit");
  }
  const Season season = parse_season(opt.season);
  const SetpointClass sp = parse_setpoint_class(opt.setpoint);
  MatrixConfig mc = matrix_config(run.config());
  if (opt.days) mc.test_days = *opt.days;
  if (opt.offset_days) mc.test_offset_days = *opt.offset_days;

  Inputs inputs(run);
  const SimulationTrace& truth = inputs.truth(sp);
  const RowRange rows = test_rows(truth, season, mc);
  const SimulationTrace reference = truth.slice(rows.begin, rows.count);
  ThermostatConfig thermostat = run.config().thermostat;
  thermostat.setpoint = setpoint_celsius(sp);
  const SimulationTrace predicted = run.stage("forward_sim", [&] {
    return forward_simulate(order, result.theta_hat, reference.driving, thermostat,
                            run.config().electrical,
                            initial_state(order, reference.y.front()),
                            controller_state_at(truth, thermostat, rows.begin));
  });

  std::string stem = result_path.stem().string();
  if (stem.rfind("fit_", 0) == 0) stem = stem.substr(4);
  const fs::path path = opt.output.empty()
                            ? run.dir() / ("forward_" + stem + "_" +
                                           std::string(to_string(season)) + "_" +
                                           std::string(to_string(sp)) + ".csv")
                            : fs::path(opt.output);
  run.prepare_dir();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_trace_csv(predicted, path);
  run.produced(path);
  out << "wrote " << path.string() << " (" << predicted.size() << " rows)\n";
  return finish(run, out);
}

int cmd_evaluate(Run& run, std::ostream& out) {
  const RunConfig& config = run.config();
  Inputs inputs(run);
  std::map<SetpointClass, SimulationTrace> truth;
  truth.emplace(SetpointClass::kNormal, inputs.truth(SetpointClass::kNormal));
  for (SetpointClass sp : config.evaluation.setpoints) truth.emplace(sp, inputs.truth(sp));

  MatrixConfig mc = matrix_config(config);
  const std::uint64_t seed = fits_seed(config);

  // Fit files from an earlier `estimate` are reused when their hash matches.
  std::vector<FitRecord> existing;
  for (const FitKey& key : requested_fits(config)) {
    const fs::path path = run.dir() / fit_file_name(key);
    if (!fs::exists(path)) continue;
    EstimationResult result = result_from_text(slurp(path));
    const EstimationProblem problem =
        make_problem(key.order, training_window(truth.at(SetpointClass::kNormal),
                                                key.train_season, mc),
                     config.estimation);
    if (result.config_hash ==
        problem_hash(key.method, problem, config.estimation.starts, fit_seed(seed, key))) {
      existing.push_back({key, std::move(result), "", 0.0});
    }
  }

  if (config.evaluation.write_traces) {
    mc.trace_dir = run.dir() / "traces";
    fs::create_directories(*mc.trace_dir);
  }
  const EvaluationMatrix matrix = run.stage("matrix", [&] {
    return run_matrix(inputs.setup(), truth, config.estimation, seed, mc, existing);
  });
  const std::vector<MarginalRow> marginals = all_marginals(matrix);

  run.prepare_dir();
  run.write_text("config.resolved.yaml", serialize_config(config));
  for (const FitRecord& f : matrix.fits) {
    if (f.result) {
      run.write_text(fit_file_name(f.key), to_text(*f.result));
    } else {
      run.failure("fit " + f.key.label() + ": " + f.error);
    }
  }
  write_matrix_csv(matrix, run.dir() / "matrix.csv");
  run.produced(run.dir() / "matrix.csv");
  write_marginals_csv(marginals, run.dir() / "marginals.csv");
  run.produced(run.dir() / "marginals.csv");
  write_fits_csv(matrix, run.dir() / "fits.csv");
  run.produced(run.dir() / "fits.csv");
  if (mc.trace_dir) {
    for (const auto& entry : fs::directory_iterator(*mc.trace_dir)) run.produced(entry.path());
  }
  for (const CellResult& c : matrix.cells) {
    if (c.status != CellStatus::kOk && c.status != CellStatus::kEstimationFailed) {
      run.failure("cell " + c.key.label() + ": " + std::string(to_string(c.status)) + " " +
                  c.message);
    }
  }
  out << "matrix: " << matrix.cells.size() << " cells, " << matrix.ok_cells() << " ok, "
      << matrix.fits.size() << " parameter sets (" << existing.size() << " reused)\n";
  return finish(run, out);
}

std::string markdown_table(const std::vector<MarginalRow>& rows, Dimension dim) {
  std::ostringstream os;
  os << "| " << to_string(dim) << " | T_z accuracy (%) | P_HVAC accuracy (%) | cells |\n"
     << "|---|---:|---:|---:|\n";
  auto value = [](double v) { return std::isfinite(v) ? format_number(v, 5) : std::string("n/a"); };
  for (const MarginalRow& r : rows) {
    if (r.dimension != dim) continue;
    os << "| " << r.group << " | " << value(r.tz_accuracy) << " | " << value(r.phvac_accuracy)
       << " | " << r.cells << " |\n";
  }
  return os.str();
}

int cmd_report(Run& run, std::ostream& out) {
  const fs::path matrix_path = run.dir() / "matrix.csv";
  if (!fs::exists(matrix_path)) {
    throw Error(ErrorCode::kIo, matrix_path.string() + " not found; run `evaluate` first");
  }
  const EvaluationMatrix matrix = read_matrix_csv(matrix_path);
  const std::vector<MarginalRow> rows = all_marginals(matrix);

  std::ostringstream md;
  md << "# Robustness report\n\n"
     << "- config hash: `" << config_hash(run.config()) << "`\n"
     << "- tool version: " << kVersion << "\n"
     << "- cells: " << matrix.cells.size() << " (" << matrix.ok_cells() << " ok)\n\n"
     << "Accuracy is 100 - MAPE. T_z is scored at the native step against the noiseless "
        "zone temperature; P_HVAC on "
     << format_number(run.config().evaluation.bin_hours, 6)
     << "-hour bin means, skipping bins whose true mean is at or below "
     << format_number(run.config().evaluation.zero_floor_w, 6) << " W.\n";
  const std::pair<Dimension, const char*> sections[] = {
      {Dimension::kMethod, "Estimation method"},
      {Dimension::kOrder, "Reduced-order model"},
      {Dimension::kTrainSeason, "Training season"},
      {Dimension::kTestSeason, "Testing season"},
      {Dimension::kSetpoint, "Setpoint"}};
  for (const auto& [dim, title] : sections) {
    md << "\n## " << title << "\n\n" << markdown_table(rows, dim);
  }
  std::vector<const CellResult*> incomplete;
  for (const CellResult& c : matrix.cells) {
    if (c.status != CellStatus::kOk) incomplete.push_back(&c);
  }
  md << "\n## Incomplete cells\n\n";
  if (incomplete.empty()) {
    md << "None.\n";
  } else {
    for (const CellResult* c : incomplete) {
      md << "- " << c->key.label() << ": " << to_string(c->status) << '\n';
    }
  }
  run.prepare_dir();
  run.write_text("report.md", md.str());
  out << "wrote " << (run.dir() / "report.md").string() << '\n';
  run.write_manifest();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grey-box RC thermal model identification and robustness evaluation",
               "greybox"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "YAML run configuration")
      ->envname(kConfigEnv);
  app.add_option("--out-dir", opt.out_dir, "Output directory (overrides output_dir)");
  app.add_option("--seed", opt.seed, "Root seed (overrides seed)");
  app.add_option("--jobs", opt.jobs, "Concurrent fits/cells")->check(CLI::PositiveNumber);

  auto* generate = app.add_subcommand("generate", "Write year-long truth traces per setpoint");
  generate->add_option("--setpoints", opt.setpoints, "Setpoints (18, 22, 26)");

  auto* estimate = app.add_subcommand("estimate", "Fit reduced-order models at 22 degC");
  estimate->add_option("--methods", opt.methods, "NLS, BE, MLE");
  estimate->add_option("--orders", opt.orders, "SM1, SM2");
  estimate->add_option("--seasons", opt.seasons, "Training seasons");
  estimate->add_option("--truth", opt.truth_file, "Training trace CSV (default truth_sp22.csv)");

  auto* forward = app.add_subcommand("forward-sim", "Forward-simulate one fitted model");
  forward->add_option("--result", opt.result_file, "Fit document")->required();
  forward->add_option("--season", opt.season, "Test season")->required();
  forward->add_option("--setpoint", opt.setpoint, "Test setpoint (18, 22, 26)")->required();
  forward->add_option("--days", opt.days, "Window length in days")->check(CLI::PositiveNumber);
  forward->add_option("--offset-days", opt.offset_days, "Window offset into the season")
      ->check(CLI::NonNegativeNumber);
  forward->add_option("--order", opt.order, "Expected model order of the fit");
  forward->add_option("--output", opt.output, "Output CSV path");

  auto* evaluate = app.add_subcommand("evaluate", "Run the robustness matrix");
  evaluate->add_option("--methods", opt.methods, "NLS, BE, MLE");
  evaluate->add_option("--orders", opt.orders, "SM1, SM2");
  evaluate->add_option("--train-seasons", opt.train_seasons, "Training seasons");
  evaluate->add_option("--test-seasons", opt.test_seasons, "Testing seasons");
  evaluate->add_option("--setpoints", opt.setpoints, "Test setpoints (18, 22, 26)");
  evaluate->add_flag("--traces", opt.traces, "Write per-cell trace CSVs");

  auto* report = app.add_subcommand("report", "Render report.md from matrix.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "greybox: " << e.what() << '\n';
    return kExitError;
  }

  try {
    const RunConfig config = resolve_config(opt);
    if (generate->parsed()) {
      Run run("generate", config);
      return cmd_generate(run, out);
    }
    if (estimate->parsed()) {
      Run run("estimate", config);
      return cmd_estimate(run, opt, out);
    }
    if (forward->parsed()) {
      Run run("forward-sim", config);
      return cmd_forward_sim(run, opt, out);
    }
    if (evaluate->parsed()) {
      Run run("evaluate", config);
      return cmd_evaluate(run, out);
    }
    if (report->parsed()) {
      Run run("report", config);
      return cmd_report(run, out);
    }
  } catch (const Error& e) {
    err << "greybox: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "greybox: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace greybox

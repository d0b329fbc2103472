#include "greybox/evaluation.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "greybox/error.h"
#include "greybox/random.h"

namespace greybox {

namespace {

// Runs body(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::string cell(double v) { return std::isfinite(v) ? format_number(v, 6) : ""; }

void write_cell_trace(const std::filesystem::path& path, const SimulationTrace& truth,
                      const SimulationTrace& pred, const BinnedSeries& truth_bins,
                      const BinnedSeries& pred_bins) {
  std::ofstream out = open_output(path);
  out << "timestamp,T_z_truth,T_z_pred,P_HVAC_truth,P_HVAC_pred,P_HVAC_bin_truth,"
         "P_HVAC_bin_pred\n";
  const std::size_t per_bin = truth_bins.samples_per_bin;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const std::size_t bin = per_bin > 0 ? k / per_bin : 0;
    out << format_iso8601(truth.driving.timestamp(k)) << ','
        << format_number(truth.states(row, 0), 17) << ','
        << format_number(pred.states(row, 0), 17) << ','
        << format_number(truth.p_hvac[k], 17) << ',' << format_number(pred.p_hvac[k], 17);
    if (bin < truth_bins.values.size()) {
      out << ',' << format_number(truth_bins.values[bin], 17) << ','
          << format_number(pred_bins.values[bin], 17) << '\n';
    } else {
      out << ",,\n";
    }
  }
}

}  // namespace

// --- metrics ------------------------------------------------------------------

AccuracyScore mape(std::span<const double> truth, std::span<const double> pred,
                   double zero_floor) {
  if (truth.size() != pred.size() || truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "mape needs equal, non-empty series");
  }
  AccuracyScore score;
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double t = std::abs(truth[i]);
    if (!(t > zero_floor)) {
      ++score.excluded_zero_bins;
      continue;
    }
    sum += 100.0 * std::abs(truth[i] - pred[i]) / t;
    ++score.n_points_used;
  }
  if (score.n_points_used == 0) {
    throw Error(ErrorCode::kAllPointsExcluded,
                "all " + std::to_string(truth.size()) + " points are below the zero floor");
  }
  score.mape = sum / static_cast<double>(score.n_points_used);
  score.accuracy = 100.0 - score.mape;
  return score;
}

BinnedSeries aggregate_phvac(std::span<const double> p_hvac, std::int64_t step_seconds,
                             double bin_hours) {
  const double per_bin_real = bin_hours * 3600.0 / static_cast<double>(step_seconds);
  const auto per_bin = static_cast<std::size_t>(std::llround(per_bin_real));
  if (step_seconds <= 0 || per_bin == 0 || std::abs(per_bin_real - per_bin) > 1e-9) {
    throw Error(ErrorCode::kIncompatibleStep,
                "bin of " + format_number(bin_hours, 6) + " h is not a whole number of " +
                    std::to_string(step_seconds) + " s steps");
  }
  BinnedSeries out;
  out.samples_per_bin = per_bin;
  const std::size_t bins = p_hvac.size() / per_bin;
  out.dropped_samples = p_hvac.size() - bins * per_bin;
  out.values.reserve(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < per_bin; ++i) sum += p_hvac[b * per_bin + i];
    out.values.push_back(sum / static_cast<double>(per_bin));
  }
  return out;
}

// --- keys -------------------------------------------------------------------

std::string_view to_string(SetpointClass sp) {
  switch (sp) {
    case SetpointClass::kLow: return "Low";
    case SetpointClass::kNormal: return "Normal";
    case SetpointClass::kHigh: return "High";
  }
  return "?";
}

SetpointClass parse_setpoint_class(std::string_view text) {
  if (text == "Low" || text == "low" || text == "18") return SetpointClass::kLow;
  if (text == "Normal" || text == "normal" || text == "22") return SetpointClass::kNormal;
  if (text == "High" || text == "high" || text == "26") return SetpointClass::kHigh;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown setpoint '" + std::string(text) + "' (expected 18, 22 or 26)");
}

double setpoint_celsius(SetpointClass sp) {
  switch (sp) {
    case SetpointClass::kLow: return 18.0;
    case SetpointClass::kNormal: return 22.0;
    case SetpointClass::kHigh: return 26.0;
  }
  return 0.0;
}

std::string ScenarioKey::label() const {
  return std::string(to_string(method)) + "_" + std::string(to_string(order)) + "_" +
         std::string(to_string(train_season)) + "_" + std::string(to_string(test_season)) +
         "_" + std::string(to_string(setpoint));
}

std::string FitKey::label() const {
  return std::string(to_string(method)) + "_" + std::string(to_string(order)) + "_" +
         std::string(to_string(train_season));
}

std::string_view to_string(CellStatus status) {
  switch (status) {
    case CellStatus::kOk: return "ok";
    case CellStatus::kEstimationFailed: return "estimation_failed";
    case CellStatus::kSimulationFailed: return "simulation_failed";
    case CellStatus::kScoreFailed: return "score_failed";
  }
  return "?";
}

std::size_t EvaluationMatrix::ok_cells() const {
  return static_cast<std::size_t>(std::count_if(
      cells.begin(), cells.end(), [](const CellResult& c) { return c.status == CellStatus::kOk; }));
}

std::size_t EvaluationMatrix::failed_fits() const {
  return static_cast<std::size_t>(
      std::count_if(fits.begin(), fits.end(), [](const FitRecord& f) { return !f.result; }));
}

// --- pipeline -----------------------------------------------------------------

SimulationTrace generate_truth(const TruthSetup& setup, double setpoint) {
  ThermostatConfig thermostat = setup.thermostat;
  thermostat.setpoint = setpoint;
  NoiseConfig noise = setup.noise;
  noise.seed = derive_seed(setup.noise.seed, "truth/setpoint/" + format_number(setpoint, 6));
  return simulate_truth(setup.theta, setup.table, thermostat, setup.elec, noise,
                        initial_state(ModelOrder::kSM4, setpoint));
}

void MatrixConfig::validate() const {
  if (methods.empty() || orders.empty() || train_seasons.empty() || test_seasons.empty() ||
      setpoints.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "every matrix dimension needs at least one value");
  }
  if (train_days < 1 || test_days < 1 || train_offset_days < 0 || test_offset_days < 0) {
    throw Error(ErrorCode::kInvalidArgument, "window lengths must be positive");
  }
  if (!(zero_floor_w >= 0.0) || !(bin_hours > 0.0) || jobs < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid scoring options");
  }
}

std::uint64_t fit_seed(std::uint64_t root, const FitKey& key) {
  return derive_seed(root, "fit/" + key.label());
}

SimulationTrace training_window(const SimulationTrace& truth_22, Season season,
                                const MatrixConfig& config) {
  const TimeSeriesTable& table = truth_22.driving;
  const RowRange rows = window_rows(table, season_window(season, year_of(table.start())),
                                    config.train_days, config.train_offset_days);
  return truth_22.slice(rows.begin, rows.count);
}

RowRange test_rows(const SimulationTrace& truth, Season season, const MatrixConfig& config) {
  const TimeSeriesTable& table = truth.driving;
  return window_rows(table, season_window(season, year_of(table.start())), config.test_days,
                     config.test_offset_days);
}

SimulationTrace test_window(const SimulationTrace& truth, Season season,
                            const MatrixConfig& config) {
  const RowRange rows = test_rows(truth, season, config);
  return truth.slice(rows.begin, rows.count);
}

FitRecord run_fit(const FitKey& key, const SimulationTrace& truth_22,
                  const EstimationHyperparameters& hyper, std::uint64_t seed,
                  const MatrixConfig& config) {
  FitRecord record{key, std::nullopt, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const SimulationTrace train = training_window(truth_22, key.train_season, config);
    const EstimationProblem problem = make_problem(key.order, train, hyper);
    record.result = estimate(key.method, problem, hyper.starts, fit_seed(seed, key));
  } catch (const std::exception& e) {
    record.error = e.what();
  }
  record.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

CellResult run_cell(const ScenarioKey& key, const FitRecord& fit, const SimulationTrace& truth,
                    const TruthSetup& setup, const MatrixConfig& config) {
  CellResult cell{key, CellStatus::kOk, std::nullopt, std::nullopt, ""};
  if (!fit.result) {
    cell.status = CellStatus::kEstimationFailed;
    cell.message = fit.error;
    return cell;
  }
  std::optional<SimulationTrace> reference;
  std::optional<SimulationTrace> predicted;
  try {
    const RowRange rows = test_rows(truth, key.test_season, config);
    reference = truth.slice(rows.begin, rows.count);
    ThermostatConfig thermostat = setup.thermostat;
    thermostat.setpoint = setpoint_celsius(key.setpoint);
    predicted = forward_simulate(key.order, fit.result->theta_hat, reference->driving,
                                 thermostat, setup.elec,
                                 initial_state(key.order, reference->y.front()),
                                 controller_state_at(truth, thermostat, rows.begin));
  } catch (const std::exception& e) {
    cell.status = CellStatus::kSimulationFailed;
    cell.message = e.what();
    return cell;
  }

  const std::vector<double> tz_truth = reference->zone_temperature();
  const std::vector<double> tz_pred = predicted->zone_temperature();
  const bool finite = std::all_of(tz_pred.begin(), tz_pred.end(),
                                  [](double v) { return std::isfinite(v); });
  if (!finite) {
    cell.status = CellStatus::kSimulationFailed;
    cell.message = "forward simulation produced non-finite temperatures";
    return cell;
  }
  std::string problems;
  try {
    cell.tz = mape(tz_truth, tz_pred, 0.0);
  } catch (const std::exception& e) {
    problems += std::string("T_z: ") + e.what();
  }
  const std::int64_t step = reference->driving.step_seconds();
  const BinnedSeries truth_bins = aggregate_phvac(reference->p_hvac, step, config.bin_hours);
  const BinnedSeries pred_bins = aggregate_phvac(predicted->p_hvac, step, config.bin_hours);
  try {
    cell.phvac = mape(truth_bins.values, pred_bins.values, config.zero_floor_w);
  } catch (const std::exception& e) {
    if (!problems.empty()) problems += "; ";
    problems += std::string("P_HVAC: ") + e.what();
  }
  if (!problems.empty()) {
    cell.status = CellStatus::kScoreFailed;
    cell.message = problems;
  }
  if (config.trace_dir) {
    write_cell_trace(*config.trace_dir / ("trace_" + key.label() + ".csv"), *reference,
                     *predicted, truth_bins, pred_bins);
  }
  return cell;
}

EvaluationMatrix run_matrix(const TruthSetup& setup,
                            const std::map<SetpointClass, SimulationTrace>& truth,
                            const EstimationHyperparameters& hyper, std::uint64_t seed,
                            const MatrixConfig& config,
                            const std::vector<FitRecord>& existing) {
  config.validate();
  const auto training = truth.find(SetpointClass::kNormal);
  if (training == truth.end()) {
    throw Error(ErrorCode::kInvalidArgument, "the 22 degC truth trace is required for training");
  }
  for (SetpointClass sp : config.setpoints) {
    if (!truth.count(sp)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "no truth trace for setpoint " + std::string(to_string(sp)));
    }
  }

  std::vector<FitKey> fit_keys;
  for (Method m : config.methods) {
    for (ModelOrder o : config.orders) {
      for (Season s : config.train_seasons) fit_keys.push_back({m, o, s});
    }
  }
  std::sort(fit_keys.begin(), fit_keys.end());
  fit_keys.erase(std::unique(fit_keys.begin(), fit_keys.end()), fit_keys.end());

  EvaluationMatrix matrix;
  matrix.fits.resize(fit_keys.size());
  parallel_for(fit_keys.size(), config.jobs, [&](std::size_t i) {
    const auto found = std::find_if(existing.begin(), existing.end(), [&](const FitRecord& r) {
      return r.key == fit_keys[i] && r.result;
    });
    matrix.fits[i] = found != existing.end()
                         ? *found
                         : run_fit(fit_keys[i], training->second, hyper, seed, config);
  });

  std::vector<ScenarioKey> cell_keys;
  for (const FitKey& f : fit_keys) {
    for (Season test : config.test_seasons) {
      for (SetpointClass sp : config.setpoints) {
        cell_keys.push_back({f.method, f.order, f.train_season, test, sp});
      }
    }
  }
  std::sort(cell_keys.begin(), cell_keys.end());
  cell_keys.erase(std::unique(cell_keys.begin(), cell_keys.end()), cell_keys.end());

  matrix.cells.resize(cell_keys.size());
  parallel_for(cell_keys.size(), config.jobs, [&](std::size_t i) {
    const ScenarioKey& key = cell_keys[i];
    const FitKey fk{key.method, key.order, key.train_season};
    const auto fit = std::lower_bound(
        matrix.fits.begin(), matrix.fits.end(), fk,
        [](const FitRecord& r, const FitKey& k) { return r.key < k; });
    matrix.cells[i] = run_cell(key, *fit, truth.at(key.setpoint), setup, config);
  });
  return matrix;
}

// --- marginals ----------------------------------------------------------------

std::string_view to_string(Dimension dim) {
  switch (dim) {
    case Dimension::kMethod: return "method";
    case Dimension::kOrder: return "model";
    case Dimension::kTrainSeason: return "train_season";
    case Dimension::kTestSeason: return "test_season";
    case Dimension::kSetpoint: return "setpoint";
  }
  return "?";
}

namespace {

std::vector<std::string> group_order(Dimension dim) {
  switch (dim) {
    case Dimension::kMethod: return {"NLS", "BE", "MLE"};
    case Dimension::kOrder: return {"SM1", "SM2"};
    case Dimension::kTrainSeason:
    case Dimension::kTestSeason: return {"Fall", "Spring", "Summer", "Winter"};
    case Dimension::kSetpoint: return {"High", "Low", "Normal"};
  }
  return {};
}

std::string group_of(const ScenarioKey& key, Dimension dim) {
  switch (dim) {
    case Dimension::kMethod: return std::string(to_string(key.method));
    case Dimension::kOrder: return std::string(to_string(key.order));
    case Dimension::kTrainSeason: return std::string(to_string(key.train_season));
    case Dimension::kTestSeason: return std::string(to_string(key.test_season));
    case Dimension::kSetpoint: return std::string(to_string(key.setpoint));
  }
  return {};
}

}  // namespace

std::vector<MarginalRow> marginal_table(const EvaluationMatrix& matrix, Dimension dim) {
  if (matrix.cells.empty()) {
    throw Error(ErrorCode::kEmptyGroup, "matrix has no cells to group by " +
                                            std::string(to_string(dim)));
  }
  std::vector<MarginalRow> rows;
  for (const std::string& group : group_order(dim)) {
    MarginalRow row{dim, group, 0.0, 0.0, 0, 0, 0};
    double tz_sum = 0.0;
    double p_sum = 0.0;
    for (const CellResult& c : matrix.cells) {
      if (group_of(c.key, dim) != group) continue;
      ++row.cells;
      if (c.tz) {
        tz_sum += c.tz->accuracy;
        ++row.tz_scored;
      }
      if (c.phvac) {
        p_sum += c.phvac->accuracy;
        ++row.phvac_scored;
      }
    }
    if (row.cells == 0) continue;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.tz_accuracy = row.tz_scored ? tz_sum / static_cast<double>(row.tz_scored) : nan;
    row.phvac_accuracy =
        row.phvac_scored ? p_sum / static_cast<double>(row.phvac_scored) : nan;
    rows.push_back(row);
  }
  return rows;
}

std::vector<MarginalRow> all_marginals(const EvaluationMatrix& matrix) {
  std::vector<MarginalRow> rows;
  for (Dimension dim : kAllDimensions) {
    auto part = marginal_table(matrix, dim);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

// --- CSV ----------------------------------------------------------------------

void write_matrix_csv(const EvaluationMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "method,order,train_season,test_season,setpoint_class,setpoint_c,status,"
         "tz_mape,tz_accuracy,tz_points,phvac_mape,phvac_accuracy,phvac_points,"
         "phvac_excluded_bins\n";
  for (const CellResult& c : matrix.cells) {
    out << to_string(c.key.method) << ',' << to_string(c.key.order) << ','
        << to_string(c.key.train_season) << ',' << to_string(c.key.test_season) << ','
        << to_string(c.key.setpoint) << ',' << format_number(setpoint_celsius(c.key.setpoint), 6)
        << ',' << to_string(c.status) << ',';
    if (c.tz) {
      out << cell(c.tz->mape) << ',' << cell(c.tz->accuracy) << ',' << c.tz->n_points_used;
    } else {
      out << ",,";
    }
    out << ',';
    if (c.phvac) {
      out << cell(c.phvac->mape) << ',' << cell(c.phvac->accuracy) << ','
          << c.phvac->n_points_used << ',' << c.phvac->excluded_zero_bins;
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

EvaluationMatrix read_matrix_csv(const std::filesystem::path& path) {
  const CsvDocument doc = read_csv_document(path);
  const std::vector<std::string> required = {
      "method",   "order",       "train_season", "test_season", "setpoint_class",
      "status",   "tz_mape",     "tz_accuracy",  "tz_points",   "phvac_mape",
      "phvac_accuracy", "phvac_points", "phvac_excluded_bins"};
  std::map<std::string, std::size_t> at;
  for (const auto& name : required) {
    const auto idx = doc.find(name);
    if (!idx) {
      throw Error(ErrorCode::kMissingColumn, path.string() + ": no column '" + name + "'");
    }
    at[name] = *idx;
  }
  EvaluationMatrix matrix;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    const std::string where = path.string() + ":" + std::to_string(doc.line_numbers[r]);
    try {
      if (row.size() < doc.header.size()) {
        throw Error(ErrorCode::kInvalidArgument, "short row");
      }
      CellResult c;
      c.key = {parse_method(row[at["method"]]), parse_model_order(row[at["order"]]),
               parse_season(row[at["train_season"]]), parse_season(row[at["test_season"]]),
               parse_setpoint_class(row[at["setpoint_class"]])};
      const std::string& status = row[at["status"]];
      if (status == "ok") {
        c.status = CellStatus::kOk;
      } else if (status == "estimation_failed") {
        c.status = CellStatus::kEstimationFailed;
      } else if (status == "simulation_failed") {
        c.status = CellStatus::kSimulationFailed;
      } else if (status == "score_failed") {
        c.status = CellStatus::kScoreFailed;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown status '" + status + "'");
      }
      auto score = [&](const char* mape_col, const char* acc_col, const char* points_col,
                       const char* excluded_col) -> std::optional<AccuracyScore> {
        double m = 0.0, a = 0.0, n = 0.0, x = 0.0;
        if (!parse_csv_number(row[at[mape_col]], m) || !parse_csv_number(row[at[acc_col]], a) ||
            !parse_csv_number(row[at[points_col]], n)) {
          throw Error(ErrorCode::kInvalidArgument, "malformed score");
        }
        if (std::isnan(m)) return std::nullopt;
        if (excluded_col && !parse_csv_number(row[at[excluded_col]], x)) {
          throw Error(ErrorCode::kInvalidArgument, "malformed score");
        }
        return AccuracyScore{m, a, static_cast<std::size_t>(n),
                             std::isnan(x) ? 0 : static_cast<std::size_t>(x)};
      };
      c.tz = score("tz_mape", "tz_accuracy", "tz_points", nullptr);
      c.phvac = score("phvac_mape", "phvac_accuracy", "phvac_points", "phvac_excluded_bins");
      matrix.cells.push_back(std::move(c));
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  std::sort(matrix.cells.begin(), matrix.cells.end(),
            [](const CellResult& a, const CellResult& b) { return a.key < b.key; });
  return matrix;
}

void write_marginals_csv(const std::vector<MarginalRow>& rows,
                         const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "dimension,group,tz_accuracy,phvac_accuracy,cells,tz_scored,phvac_scored\n";
  for (const MarginalRow& r : rows) {
    out << to_string(r.dimension) << ',' << r.group << ',' << cell(r.tz_accuracy) << ','
        << cell(r.phvac_accuracy) << ',' << r.cells << ',' << r.tz_scored << ','
        << r.phvac_scored << '\n';
  }
}

void write_fits_csv(const EvaluationMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "method,order,train_season,status,objective,iterations,converged,start_index,"
         "starts_converged\n";
  for (const FitRecord& f : matrix.fits) {
    out << to_string(f.key.method) << ',' << to_string(f.key.order) << ','
        << to_string(f.key.train_season) << ',';
    if (f.result) {
      out << "ok," << cell(f.result->objective) << ',' << f.result->iterations << ','
          << (f.result->converged ? "true" : "false") << ',' << f.result->start_index << ','
          << f.result->starts_converged << '\n';
    } else {
      out << "failed,,,,,\n";
    }
  }
}

}  // namespace greybox

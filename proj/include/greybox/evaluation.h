#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "greybox/estimators.h"
#include "greybox/simulator.h"
#include "greybox/timeseries.h"

namespace greybox {

struct AccuracyScore {
  double mape = 0.0;      // percent
  double accuracy = 0.0;  // 100 - mape
  std::size_t n_points_used = 0;
  std::size_t excluded_zero_bins = 0;
};

// Mean of 100 |truth - pred| / |truth| over points with |truth| > zero_floor.
// Throws InvalidArgument on length mismatch, AllPointsExcluded when nothing
// is left to score.
AccuracyScore mape(std::span<const double> truth, std::span<const double> pred,
                   double zero_floor);

struct BinnedSeries {
  std::vector<double> values;
  std::size_t samples_per_bin = 0;
  std::size_t dropped_samples = 0;  // trailing partial bin
};

// Arithmetic mean per complete bin of bin_hours. The bin must hold a whole
// number of steps.
BinnedSeries aggregate_phvac(std::span<const double> p_hvac, std::int64_t step_seconds,
                             double bin_hours = 3.0);

enum class SetpointClass { kLow, kNormal, kHigh };

// Report order: High, Low, Normal.
inline constexpr SetpointClass kAllSetpointClasses[] = {
    SetpointClass::kHigh, SetpointClass::kLow, SetpointClass::kNormal};

std::string_view to_string(SetpointClass sp);
SetpointClass parse_setpoint_class(std::string_view text);  // name or degC
double setpoint_celsius(SetpointClass sp);                  // 18, 22, 26

struct ScenarioKey {
  Method method = Method::kNls;
  ModelOrder order = ModelOrder::kSM1;
  Season train_season = Season::kWinter;
  Season test_season = Season::kWinter;
  SetpointClass setpoint = SetpointClass::kNormal;

  auto operator<=>(const ScenarioKey&) const = default;
  // e.g. "NLS_SM1_Summer_Winter_High"
  std::string label() const;
};

enum class CellStatus { kOk, kEstimationFailed, kSimulationFailed, kScoreFailed };
std::string_view to_string(CellStatus status);

struct CellResult {
  ScenarioKey key;
  CellStatus status = CellStatus::kOk;
  std::optional<AccuracyScore> tz;
  std::optional<AccuracyScore> phvac;
  std::string message;
};

struct FitKey {
  Method method = Method::kNls;
  ModelOrder order = ModelOrder::kSM1;
  Season train_season = Season::kWinter;

  auto operator<=>(const FitKey&) const = default;
  // e.g. "NLS_SM1_Summer"
  std::string label() const;
};

struct FitRecord {
  FitKey key;
  std::optional<EstimationResult> result;
  std::string error;
  double seconds = 0.0;
};

struct EvaluationMatrix {
  std::vector<FitRecord> fits;   // sorted by FitKey
  std::vector<CellResult> cells;  // sorted by ScenarioKey

  std::size_t ok_cells() const;
  std::size_t failed_fits() const;
};

// Everything needed to regenerate the ground truth.
struct TruthSetup {
  TimeSeriesTable table;  // year of driving data with exogenous columns
  ParameterVector theta{default_sm4_truth()};
  ThermostatConfig thermostat;
  HouseElectricalParams elec;
  NoiseConfig noise;
};

// Year-long SM4 run at the given setpoint, starting from the setpoint.
// The noise stream is derived from noise.seed and the setpoint.
SimulationTrace generate_truth(const TruthSetup& setup, double setpoint);

struct MatrixConfig {
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
  int jobs = 1;
  std::optional<std::filesystem::path> trace_dir;

  void validate() const;
};

// Seed handed to the multi-start of one fit.
std::uint64_t fit_seed(std::uint64_t root, const FitKey& key);

// Training window of the 22 degC trace for one fit.
SimulationTrace training_window(const SimulationTrace& truth_22, Season season,
                                const MatrixConfig& config);
RowRange test_rows(const SimulationTrace& truth, Season season, const MatrixConfig& config);
SimulationTrace test_window(const SimulationTrace& truth, Season season,
                            const MatrixConfig& config);

FitRecord run_fit(const FitKey& key, const SimulationTrace& truth_22,
                  const EstimationHyperparameters& hyper, std::uint64_t seed,
                  const MatrixConfig& config);

// Forward-simulates one fitted model on a test window and scores it. The
// thermostat starts from the truth run's controller memory at the window start.
CellResult run_cell(const ScenarioKey& key, const FitRecord& fit,
                    const SimulationTrace& truth, const TruthSetup& setup,
                    const MatrixConfig& config);

// `truth` must hold every requested setpoint plus Normal (training).
// Fits found in `existing` are reused instead of re-estimated.
EvaluationMatrix run_matrix(const TruthSetup& setup,
                            const std::map<SetpointClass, SimulationTrace>& truth,
                            const EstimationHyperparameters& hyper, std::uint64_t seed,
                            const MatrixConfig& config,
                            const std::vector<FitRecord>& existing = {});

enum class Dimension { kMethod, kOrder, kTrainSeason, kTestSeason, kSetpoint };

inline constexpr Dimension kAllDimensions[] = {Dimension::kMethod, Dimension::kOrder,
                                               Dimension::kTrainSeason,
                                               Dimension::kTestSeason,
                                               Dimension::kSetpoint};

std::string_view to_string(Dimension dim);

struct MarginalRow {
  Dimension dimension = Dimension::kMethod;
  std::string group;
  double tz_accuracy = 0.0;     // NaN when no cell in the group has a score
  double phvac_accuracy = 0.0;
  std::size_t cells = 0;
  std::size_t tz_scored = 0;
  std::size_t phvac_scored = 0;
};

// Unweighted mean per group value, groups in report order. Throws
// EmptyGroup when the matrix has no cells.
std::vector<MarginalRow> marginal_table(const EvaluationMatrix& matrix, Dimension dim);
std::vector<MarginalRow> all_marginals(const EvaluationMatrix& matrix);

void write_matrix_csv(const EvaluationMatrix& matrix, const std::filesystem::path& path);
// Cells only; scores carry the 6 significant digits written to the file.
EvaluationMatrix read_matrix_csv(const std::filesystem::path& path);
void write_marginals_csv(const std::vector<MarginalRow>& rows,
                         const std::filesystem::path& path);
void write_fits_csv(const EvaluationMatrix& matrix, const std::filesystem::path& path);

}  // namespace greybox

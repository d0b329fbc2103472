#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace greybox {

using TimePoint = std::chrono::sys_seconds;

// Canonical column names shared by ingestion, synthesis and the simulators.
namespace col {
inline constexpr std::string_view kAmbient = "T_am";         // degC
inline constexpr std::string_view kIrradiance = "GHI";       // W/m^2
inline constexpr std::string_view kLoad = "P_load";          // W, metered
inline constexpr std::string_view kInternalGain = "Q_IHL";   // W
inline constexpr std::string_view kSolarGain = "Q_solar";    // W
inline constexpr std::string_view kSolAirWall = "T_sol_w";   // degC
inline constexpr std::string_view kSolAirRoof = "T_sol_r";   // degC
}  // namespace col

// Immutable, fixed-cadence table of named real columns.
//
// Row k is stamped start + k * step. The one exception is a leap day removed
// on ingestion: rows from `skip_index` onwards are shifted by 86400 s so the
// calendar stays correct while the row cadence stays uniform.
class TimeSeriesTable {
 public:
  TimeSeriesTable(TimePoint start, std::int64_t step_seconds,
                  std::vector<std::string> names,
                  std::vector<std::vector<double>> columns,
                  std::optional<std::size_t> skip_index = std::nullopt);

  std::size_t size() const { return columns_.front().size(); }
  std::int64_t step_seconds() const { return step_; }
  TimePoint start() const { return start_; }
  std::optional<std::size_t> skip_index() const { return skip_index_; }

  TimePoint timestamp(std::size_t row) const;
  // Row stamped exactly `t`, if any.
  std::optional<std::size_t> index_of(TimePoint t) const;

  const std::vector<std::string>& names() const { return names_; }
  bool has(std::string_view name) const;
  std::span<const double> column(std::string_view name) const;

  TimeSeriesTable with_column(std::string name, std::vector<double> values) const;
  TimeSeriesTable slice(std::size_t begin, std::size_t count) const;

  bool operator==(const TimeSeriesTable&) const = default;

 private:
  TimePoint start_;
  std::int64_t step_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::optional<std::size_t> skip_index_;
};

enum class Season { kWinter, kSpring, kSummer, kFall };

inline constexpr Season kAllSeasons[] = {Season::kWinter, Season::kSpring,
                                         Season::kSummer, Season::kFall};

std::string_view to_string(Season season);
Season parse_season(std::string_view text);
Season season_of(TimePoint t);

// Calendar quarter [begin, end) in UTC.
struct SeasonWindow {
  Season season;
  TimePoint begin;
  TimePoint end;

  int days() const;
};

SeasonWindow season_window(Season season, int year);
int year_of(TimePoint t);

struct RowRange {
  std::size_t begin = 0;
  std::size_t count = 0;
};

// Rows covering `days` whole days starting `offset_days` into the window.
// Throws OutOfRange when the span leaves the season or the table.
RowRange window_rows(const TimeSeriesTable& table, const SeasonWindow& window,
                     int days, int offset_days);
TimeSeriesTable slice_window(const TimeSeriesTable& table,
                             const SeasonWindow& window, int days,
                             int offset_days);

// Bin-mean downsampling (trailing partial bin dropped) or step-hold
// upsampling. The new step must be a multiple or divisor of the old one.
TimeSeriesTable resample(const TimeSeriesTable& table,
                         std::int64_t new_step_seconds);

// --- CSV -------------------------------------------------------------------

TimePoint parse_iso8601(std::string_view text);
std::string format_iso8601(TimePoint t);

struct CsvSchema {
  std::string timestamp = "timestamp";
  // (table column name, CSV header name)
  std::vector<std::pair<std::string, std::string>> columns = {
      {std::string(col::kAmbient), std::string(col::kAmbient)},
      {std::string(col::kIrradiance), std::string(col::kIrradiance)},
      {std::string(col::kLoad), std::string(col::kLoad)},
  };
  // Files missing more than this fraction of rows/values are rejected;
  // shorter gaps are linearly interpolated.
  double max_gap_fraction = 0.01;

  bool operator==(const CsvSchema&) const = default;
};

TimeSeriesTable ingest_csv(const std::filesystem::path& path,
                           const CsvSchema& schema);

// Header row, ISO-8601 timestamps, 6 significant digits.
void write_csv(const TimeSeriesTable& table, const std::filesystem::path& path);

// Minimal CSV reader shared by the table and trace loaders. Fields are
// trimmed; quoting is not supported.
struct CsvDocument {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based, per row

  std::optional<std::size_t> find(std::string_view name) const;
};

CsvDocument read_csv_document(const std::filesystem::path& path);

// Parses a full-field decimal into `out`. Empty and NaN-like fields give
// NaN. Returns false when the field is not a number.
bool parse_csv_number(std::string_view field, double& out);

std::string format_number(double value, int significant_digits);

}  // namespace greybox

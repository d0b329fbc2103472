#include "greybox/timeseries.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "greybox/error.h"

namespace greybox {

namespace {

using std::chrono::days;
using std::chrono::seconds;
using std::chrono::sys_days;

constexpr std::int64_t kSecondsPerDay = 86400;

std::string trim(std::string_view s) {
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s.remove_prefix(1);
    s.remove_suffix(1);
  }
  return std::string(s);
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(pos)));
      break;
    }
    fields.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return fields;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

bool is_leap_day(TimePoint t) {
  const std::chrono::year_month_day ymd{std::chrono::floor<days>(t)};
  return ymd.month() == std::chrono::February &&
         ymd.day() == std::chrono::day{29};
}

}  // namespace

// --- TimeSeriesTable -------------------------------------------------------

TimeSeriesTable::TimeSeriesTable(TimePoint start, std::int64_t step_seconds,
                                 std::vector<std::string> names,
                                 std::vector<std::vector<double>> columns,
                                 std::optional<std::size_t> skip_index)
    : start_(start),
      step_(step_seconds),
      names_(std::move(names)),
      columns_(std::move(columns)),
      skip_index_(skip_index) {
  if (step_ <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "step_seconds must be positive");
  }
  if (names_.empty() || names_.size() != columns_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "table needs one name per column and at least one column");
  }
  const std::size_t n = columns_.front().size();
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "table needs at least 2 rows");
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].size() != n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "column '" + names_[c] + "' has a different length");
    }
    if (std::count(names_.begin(), names_.end(), names_[c]) != 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate column '" + names_[c] + "'");
    }
    for (double v : columns_[c]) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "non-finite value in column '" + names_[c] + "'");
      }
    }
  }
  if (skip_index_ && (*skip_index_ == 0 || *skip_index_ >= n)) {
    skip_index_.reset();
  }
}

TimePoint TimeSeriesTable::timestamp(std::size_t row) const {
  std::int64_t offset = static_cast<std::int64_t>(row) * step_;
  if (skip_index_ && row >= *skip_index_) offset += kSecondsPerDay;
  return start_ + seconds(offset);
}

std::optional<std::size_t> TimeSeriesTable::index_of(TimePoint t) const {
  const std::int64_t d = (t - start_).count();
  if (d < 0) return std::nullopt;
  auto candidate = [&](std::int64_t delta) -> std::optional<std::size_t> {
    if (delta < 0 || delta % step_ != 0) return std::nullopt;
    const auto row = static_cast<std::size_t>(delta / step_);
    if (row >= size()) return std::nullopt;
    return row;
  };
  if (auto row = candidate(d); row && (!skip_index_ || *row < *skip_index_)) {
    return row;
  }
  if (skip_index_) {
    if (auto row = candidate(d - kSecondsPerDay); row && *row >= *skip_index_) {
      return row;
    }
  }
  return std::nullopt;
}

bool TimeSeriesTable::has(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::span<const double> TimeSeriesTable::column(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw Error(ErrorCode::kMissingColumn,
                "table has no column '" + std::string(name) + "'");
  }
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

TimeSeriesTable TimeSeriesTable::with_column(std::string name,
                                             std::vector<double> values) const {
  auto names = names_;
  auto columns = columns_;
  const auto it = std::find(names.begin(), names.end(), name);
  if (it != names.end()) {
    columns[static_cast<std::size_t>(it - names.begin())] = std::move(values);
  } else {
    names.push_back(std::move(name));
    columns.push_back(std::move(values));
  }
  return TimeSeriesTable(start_, step_, std::move(names), std::move(columns),
                         skip_index_);
}

TimeSeriesTable TimeSeriesTable::slice(std::size_t begin,
                                       std::size_t count) const {
  if (count < 2 || begin + count > size()) {
    throw Error(ErrorCode::kOutOfRange,
                "slice [" + std::to_string(begin) + ", +" +
                    std::to_string(count) + ") outside table of " +
                    std::to_string(size()) + " rows");
  }
  std::vector<std::vector<double>> columns;
  columns.reserve(columns_.size());
  for (const auto& c : columns_) {
    columns.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(begin),
                         c.begin() + static_cast<std::ptrdiff_t>(begin + count));
  }
  std::optional<std::size_t> skip;
  if (skip_index_ && *skip_index_ > begin && *skip_index_ < begin + count) {
    skip = *skip_index_ - begin;
  }
  return TimeSeriesTable(timestamp(begin), step_, names_, std::move(columns),
                         skip);
}

// --- Seasons ---------------------------------------------------------------

std::string_view to_string(Season season) {
  switch (season) {
    case Season::kWinter: return "Winter";
    case Season::kSpring: return "Spring";
    case Season::kSummer: return "Summer";
    case Season::kFall: return "Fall";
  }
  return "?";
}

Season parse_season(std::string_view text) {
  for (Season s : kAllSeasons) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown season '" + std::string(text) + "'");
}

int year_of(TimePoint t) {
  const std::chrono::year_month_day ymd{std::chrono::floor<days>(t)};
  return static_cast<int>(ymd.year());
}

Season season_of(TimePoint t) {
  const std::chrono::year_month_day ymd{std::chrono::floor<days>(t)};
  const unsigned month = static_cast<unsigned>(ymd.month());
  return static_cast<Season>((month - 1) / 3);
}

int SeasonWindow::days() const {
  return static_cast<int>((end - begin).count() / kSecondsPerDay);
}

SeasonWindow season_window(Season season, int year) {
  const int q = static_cast<int>(season);
  const std::chrono::year y{year};
  const sys_days begin{y / std::chrono::month(static_cast<unsigned>(3 * q + 1)) /
                       1};
  const sys_days end =
      q == 3 ? sys_days{(y + std::chrono::years{1}) / std::chrono::January / 1}
             : sys_days{y / std::chrono::month(static_cast<unsigned>(3 * q + 4)) /
                        1};
  return {season, TimePoint(begin), TimePoint(end)};
}

RowRange window_rows(const TimeSeriesTable& table, const SeasonWindow& window,
                     int days_count, int offset_days) {
  const std::string label = std::string(to_string(window.season)) + " window (" +
                            std::to_string(days_count) + " days at offset " +
                            std::to_string(offset_days) + ")";
  if (days_count <= 0 || offset_days < 0) {
    throw Error(ErrorCode::kOutOfRange, label + ": invalid day span");
  }
  const std::int64_t span = static_cast<std::int64_t>(days_count) * kSecondsPerDay;
  if (span % table.step_seconds() != 0) {
    throw Error(ErrorCode::kIncompatibleStep,
                label + ": days do not divide into whole steps");
  }
  const TimePoint first = window.begin + days(offset_days);
  if (first + seconds(span) > window.end) {
    throw Error(ErrorCode::kOutOfRange, label + " runs past the season end");
  }
  const auto begin = table.index_of(first);
  const auto count = static_cast<std::size_t>(span / table.step_seconds());
  if (!begin || *begin + count > table.size()) {
    throw Error(ErrorCode::kOutOfRange, label + " is not covered by the table");
  }
  if (table.timestamp(*begin + count - 1) >= window.end) {
    throw Error(ErrorCode::kOutOfRange, label + " runs past the season end");
  }
  return {*begin, count};
}

TimeSeriesTable slice_window(const TimeSeriesTable& table,
                             const SeasonWindow& window, int days_count,
                             int offset_days) {
  const RowRange rows = window_rows(table, window, days_count, offset_days);
  return table.slice(rows.begin, rows.count);
}

TimeSeriesTable resample(const TimeSeriesTable& table,
                         std::int64_t new_step_seconds) {
  const std::int64_t old_step = table.step_seconds();
  if (new_step_seconds < 60 ||
      (new_step_seconds % old_step != 0 && old_step % new_step_seconds != 0)) {
    throw Error(ErrorCode::kIncompatibleStep,
                std::to_string(old_step) + " s -> " +
                    std::to_string(new_step_seconds) + " s");
  }
  std::vector<std::vector<double>> columns;
  std::optional<std::size_t> skip = table.skip_index();
  if (new_step_seconds >= old_step) {
    const auto factor = static_cast<std::size_t>(new_step_seconds / old_step);
    const std::size_t bins = table.size() / factor;
    if (bins < 2) {
      throw Error(ErrorCode::kIncompatibleStep,
                  "fewer than 2 complete bins at the new step");
    }
    if (skip) {
      if (*skip % factor != 0) {
        throw Error(ErrorCode::kIncompatibleStep,
                    "bins straddle the removed leap day");
      }
      skip = *skip / factor;
    }
    for (const auto& name : table.names()) {
      const auto src = table.column(name);
      std::vector<double> out(bins);
      for (std::size_t b = 0; b < bins; ++b) {
        const auto first = src.begin() + static_cast<std::ptrdiff_t>(b * factor);
        out[b] = std::accumulate(first, first + static_cast<std::ptrdiff_t>(factor),
                                 0.0) /
                 static_cast<double>(factor);
      }
      columns.push_back(std::move(out));
    }
  } else {
    const auto factor = static_cast<std::size_t>(old_step / new_step_seconds);
    if (skip) skip = *skip * factor;
    for (const auto& name : table.names()) {
      const auto src = table.column(name);
      std::vector<double> out;
      out.reserve(src.size() * factor);
      for (double v : src) out.insert(out.end(), factor, v);
      columns.push_back(std::move(out));
    }
  }
  return TimeSeriesTable(table.start(), new_step_seconds, table.names(),
                         std::move(columns), skip);
}

// --- CSV -------------------------------------------------------------------

TimePoint parse_iso8601(std::string_view text) {
  const auto fail = [&]() {
    return Error(ErrorCode::kUnparseableTimestamp,
                 "cannot parse '" + std::string(text) + "'");
  };
  std::string_view s = text;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') throw fail();
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) ||
      !parse_int(s.substr(8, 2), d)) {
    throw fail();
  }
  s.remove_prefix(10);
  if (!s.empty() && (s.front() == 'T' || s.front() == ' ')) {
    s.remove_prefix(1);
    if (s.size() < 5 || s[2] != ':' || !parse_int(s.substr(0, 2), h) ||
        !parse_int(s.substr(3, 2), mi)) {
      throw fail();
    }
    s.remove_prefix(5);
    if (!s.empty() && s.front() == ':') {
      if (s.size() < 3 || !parse_int(s.substr(1, 2), sec)) throw fail();
      s.remove_prefix(3);
      if (!s.empty() && s.front() == '.') {
        s.remove_prefix(1);
        while (!s.empty() && s.front() >= '0' && s.front() <= '9') {
          s.remove_prefix(1);
        }
      }
    }
  }
  if (s == "Z" || s == "+00:00" || s == "+0000") s = {};
  if (!s.empty()) throw fail();
  const std::chrono::year_month_day ymd{
      std::chrono::year{y}, std::chrono::month(static_cast<unsigned>(mo)),
      std::chrono::day(static_cast<unsigned>(d))};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59 || h < 0 || mi < 0 ||
      sec < 0) {
    throw fail();
  }
  return TimePoint(sys_days(ymd)) + std::chrono::hours(h) +
         std::chrono::minutes(mi) + seconds(sec);
}

std::string format_iso8601(TimePoint t) {
  const auto day = std::chrono::floor<days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string format_number(double value, int significant_digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, value);
  return buf;
}

bool parse_csv_number(std::string_view field, double& out) {
  if (field.empty() || field == "nan" || field == "NaN" || field == "NAN" ||
      field == "NA" || field == "null") {
    out = std::nan("");
    return true;
  }
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::optional<std::size_t> CsvDocument::find(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

CsvDocument read_csv_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  CsvDocument doc;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      doc.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != doc.header.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  where(path, line_no) + ": expected " +
                      std::to_string(doc.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    doc.rows.push_back(std::move(fields));
    doc.line_numbers.push_back(line_no);
  }
  if (!have_header) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": empty file");
  }
  return doc;
}

TimeSeriesTable ingest_csv(const std::filesystem::path& path,
                           const CsvSchema& schema) {
  const CsvDocument doc = read_csv_document(path);
  const auto ts_col = doc.find(schema.timestamp);
  if (!ts_col) {
    throw Error(ErrorCode::kMissingColumn,
                path.string() + ": no column '" + schema.timestamp + "'");
  }
  std::vector<std::size_t> value_cols;
  for (const auto& [name, header] : schema.columns) {
    const auto c = doc.find(header);
    if (!c) {
      throw Error(ErrorCode::kMissingColumn,
                  path.string() + ": no column '" + header + "'");
    }
    value_cols.push_back(*c);
  }

  struct Row {
    TimePoint t;
    std::size_t line;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  rows.reserve(doc.rows.size());
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& fields = doc.rows[r];
    const std::size_t line = doc.line_numbers[r];
    TimePoint t;
    try {
      t = parse_iso8601(fields[*ts_col]);
    } catch (const Error& e) {
      throw Error(ErrorCode::kUnparseableTimestamp,
                  where(path, line) + ": '" + fields[*ts_col] + "'");
    }
    if (is_leap_day(t)) continue;
    Row row{t, line, {}};
    for (std::size_t c : value_cols) {
      double v = 0.0;
      if (!parse_csv_number(fields[c], v)) {
        throw Error(ErrorCode::kInvalidArgument,
                    where(path, line) + ": '" + fields[c] + "' is not a number");
      }
      row.values.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                path.string() + ": fewer than 2 data rows");
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.t < b.t; });

  // Leap-day handling: rows on/after 1 March of a leap year whose Feb 29 the
  // data spans are pulled back a day for cadence arithmetic.
  std::optional<TimePoint> leap_cut;
  {
    const int y0 = year_of(rows.front().t);
    const int y1 = year_of(rows.back().t);
    for (int y = y0; y <= y1; ++y) {
      const std::chrono::year year{y};
      if (!year.is_leap()) continue;
      const TimePoint cut{sys_days{year / std::chrono::March / 1}};
      if (rows.front().t < cut && rows.back().t >= cut) {
        if (leap_cut) {
          throw Error(ErrorCode::kInvalidArgument,
                      path.string() + ": spans more than one leap day");
        }
        leap_cut = cut;
      }
    }
  }
  auto row_clock = [&](TimePoint t) {
    return (leap_cut && t >= *leap_cut) ? t - days(1) : t;
  };

  std::int64_t step = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::int64_t d = (row_clock(rows[i].t) - row_clock(rows[i - 1].t)).count();
    if (d <= 0) {
      throw Error(ErrorCode::kNonMonotonicTime,
                  where(path, rows[i].line) + ": duplicate timestamp " +
                      format_iso8601(rows[i].t));
    }
    step = step == 0 ? d : std::min(step, d);
  }
  if (step < 60) {
    throw Error(ErrorCode::kNonMonotonicTime,
                path.string() + ": cadence below one minute");
  }
  const TimePoint start = rows.front().t;
  const std::int64_t total =
      (row_clock(rows.back().t) - start).count() / step + 1;
  const auto n = static_cast<std::size_t>(total);

  std::vector<std::vector<double>> columns(
      value_cols.size(), std::vector<double>(n, std::nan("")));
  for (const Row& row : rows) {
    const std::int64_t d = (row_clock(row.t) - start).count();
    if (d % step != 0) {
      throw Error(ErrorCode::kNonMonotonicTime,
                  where(path, row.line) + ": timestamp off the " +
                      std::to_string(step) + " s grid");
    }
    const auto k = static_cast<std::size_t>(d / step);
    for (std::size_t c = 0; c < value_cols.size(); ++c) {
      columns[c][k] = row.values[c];
    }
  }

  // Absent rows and rows with a blank/NaN field both count as gaps.
  std::size_t incomplete = 0;
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& c : columns) {
      if (std::isnan(c[k])) {
        ++incomplete;
        break;
      }
    }
  }
  if (static_cast<double>(incomplete) >
      schema.max_gap_fraction * static_cast<double>(n)) {
    throw Error(ErrorCode::kTooManyGaps,
                path.string() + ": " + std::to_string(incomplete) + " of " +
                    std::to_string(n) + " rows missing or incomplete");
  }

  for (auto& c : columns) {
    std::size_t k = 0;
    while (k < n) {
      if (!std::isnan(c[k])) {
        ++k;
        continue;
      }
      std::size_t end = k;
      while (end < n && std::isnan(c[end])) ++end;
      if (k == 0 && end == n) {
        throw Error(ErrorCode::kTooManyGaps, path.string() + ": empty column");
      }
      for (std::size_t j = k; j < end; ++j) {
        if (k == 0) {
          c[j] = c[end];
        } else if (end == n) {
          c[j] = c[k - 1];
        } else {
          const double w = static_cast<double>(j - k + 1) /
                           static_cast<double>(end - k + 1);
          c[j] = (1.0 - w) * c[k - 1] + w * c[end];
        }
      }
      k = end;
    }
  }

  std::optional<std::size_t> skip;
  if (leap_cut) {
    skip = static_cast<std::size_t>((row_clock(*leap_cut) - start).count() / step);
  }
  std::vector<std::string> names;
  for (const auto& [name, header] : schema.columns) names.push_back(name);
  return TimeSeriesTable(start, step, std::move(names), std::move(columns), skip);
}

void write_csv(const TimeSeriesTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "timestamp";
  for (const auto& name : table.names()) out << ',' << name;
  out << '\n';
  std::vector<std::span<const double>> cols;
  for (const auto& name : table.names()) cols.push_back(table.column(name));
  for (std::size_t k = 0; k < table.size(); ++k) {
    out << format_iso8601(table.timestamp(k));
    for (const auto& c : cols) out << ',' << format_number(c[k], 6);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace greybox

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.h"
#include "greybox/error.h"
#include "greybox/timeseries.h"
#include "greybox/weather.h"

namespace greybox {
namespace {

using testing::temp_dir;
using testing::write_file;

TimePoint at(int y, unsigned m, unsigned d, int hours = 0) {
  return TimePoint(std::chrono::sys_days(std::chrono::year{y} / std::chrono::month{m} /
                                         std::chrono::day{d})) +
         std::chrono::hours{hours};
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

std::string csv_rows(TimePoint start, int rows, int step, int skip = -1) {
  std::ostringstream out;
  out << "timestamp,T_am,GHI,P_load\n";
  for (int k = 0; k < rows; ++k) {
    if (k == skip) continue;
    out << format_iso8601(start + std::chrono::seconds{k * step}) << ',' << 10 + k % 7 << ','
        << (k % 3) * 100 << ',' << 500 + k << '\n';
  }
  return out.str();
}

TEST(IngestCsv, ThreeRowReadback) {
  const auto dir = temp_dir("ingest3");
  write_file(dir / "w.csv",
             "timestamp,T_am,GHI,P_load\n"
             "2017-01-01T00:00:00Z,10,0,500\n"
             "2017-01-01T00:10:00Z,11,0,510\n"
             "2017-01-01T00:20:00Z,12,0,520\n");
  const TimeSeriesTable t = ingest_csv(dir / "w.csv", {});
  EXPECT_EQ(t.step_seconds(), 600);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.column("T_am")[0], 10.0);
  EXPECT_EQ(t.column("T_am")[1], 11.0);
  EXPECT_EQ(t.column("T_am")[2], 12.0);
  EXPECT_EQ(t.start(), at(2017, 1, 1));
}

TEST(IngestCsv, DuplicateTimestampIsNonMonotonic) {
  const auto dir = temp_dir("ingest_dup");
  write_file(dir / "w.csv",
             "timestamp,T_am,GHI,P_load\n"
             "2017-01-01T00:00:00Z,10,0,500\n"
             "2017-01-01T00:10:00Z,11,0,510\n"
             "2017-01-01T00:10:00Z,12,0,520\n"
             "2017-01-01T00:20:00Z,12,0,520\n");
  EXPECT_EQ(code_of([&] { ingest_csv(dir / "w.csv", {}); }), ErrorCode::kNonMonotonicTime);
}

TEST(IngestCsv, FullYearRowCount) {
  const auto dir = temp_dir("ingest_year");
  write_file(dir / "w.csv", csv_rows(at(2017, 1, 1), 365 * 24 * 6, 600));
  const TimeSeriesTable t = ingest_csv(dir / "w.csv", {});
  EXPECT_EQ(t.size(), 52560u);
  EXPECT_EQ(t.size(), 365u * 24u * 6u);
}

TEST(IngestCsv, LeapDayDropped) {
  const auto dir = temp_dir("ingest_leap");
  write_file(dir / "w.csv", csv_rows(at(2016, 2, 28), 3 * 144, 600));
  const TimeSeriesTable t = ingest_csv(dir / "w.csv", {});
  EXPECT_EQ(t.size(), 2u * 144u);
  EXPECT_EQ(t.timestamp(144), at(2016, 3, 1));
  EXPECT_FALSE(t.index_of(at(2016, 2, 29)).has_value());
}

TEST(IngestCsv, ShortGapInterpolated) {
  const auto dir = temp_dir("ingest_gap");
  write_file(dir / "w.csv", csv_rows(at(2017, 1, 1), 200, 600, 100));
  const TimeSeriesTable t = ingest_csv(dir / "w.csv", {});
  ASSERT_EQ(t.size(), 200u);
  const auto load = t.column("P_load");
  EXPECT_DOUBLE_EQ(load[100], 0.5 * (load[99] + load[101]));
}

TEST(IngestCsv, TooManyGapsRejected) {
  const auto dir = temp_dir("ingest_gaps");
  std::ostringstream out;
  out << "timestamp,T_am,GHI,P_load\n";
  for (int k = 0; k < 100; ++k) {
    if (k >= 40 && k < 45) continue;
    out << format_iso8601(at(2017, 1, 1) + std::chrono::seconds{600 * k}) << ",10,0,500\n";
  }
  write_file(dir / "w.csv", out.str());
  EXPECT_EQ(code_of([&] { ingest_csv(dir / "w.csv", {}); }), ErrorCode::kTooManyGaps);
}

TEST(IngestCsv, MissingColumnAndBadTimestamp) {
  const auto dir = temp_dir("ingest_bad");
  write_file(dir / "a.csv", "timestamp,T_am,GHI\n2017-01-01T00:00:00Z,1,2\n");
  EXPECT_EQ(code_of([&] { ingest_csv(dir / "a.csv", {}); }), ErrorCode::kMissingColumn);
  write_file(dir / "b.csv",
             "timestamp,T_am,GHI,P_load\nyesterday,1,2,3\n2017-01-01T00:10:00Z,1,2,3\n");
  EXPECT_EQ(code_of([&] { ingest_csv(dir / "b.csv", {}); }), ErrorCode::kUnparseableTimestamp);
}

TEST(IngestCsv, ColumnMappingRenames) {
  const auto dir = temp_dir("ingest_map");
  write_file(dir / "w.csv",
             "time,temp,ghi,load\n"
             "2017-01-01T00:00:00Z,10,0,500\n"
             "2017-01-01T00:10:00Z,11,0,510\n");
  CsvSchema schema;
  schema.timestamp = "time";
  schema.columns = {{"T_am", "temp"}, {"GHI", "ghi"}, {"P_load", "load"}};
  const TimeSeriesTable t = ingest_csv(dir / "w.csv", schema);
  EXPECT_EQ(t.column("T_am")[1], 11.0);
}

TEST(WriteCsv, RoundTripsAtSixDigits) {
  const auto dir = temp_dir("write_csv");
  const TimeSeriesTable t(at(2017, 1, 1), 600, {"T_am", "GHI", "P_load"},
                          {{10.5, 11.25, 12.125}, {0, 100, 200}, {500, 600, 700}});
  write_csv(t, dir / "t.csv");
  EXPECT_EQ(ingest_csv(dir / "t.csv", {}), t);
}

TEST(SeasonWindow, QuarterDayCounts) {
  EXPECT_EQ(season_window(Season::kWinter, 2017).days(), 90);
  EXPECT_EQ(season_window(Season::kSpring, 2017).days(), 91);
  EXPECT_EQ(season_window(Season::kSummer, 2017).days(), 92);
  EXPECT_EQ(season_window(Season::kFall, 2017).days(), 92);
  int total = 0;
  for (Season s : kAllSeasons) total += season_window(s, 2017).days();
  EXPECT_EQ(total, 365);
  EXPECT_EQ(season_of(at(2017, 7, 1)), Season::kSummer);
  EXPECT_EQ(season_of(at(2017, 12, 31, 23)), Season::kFall);
}

TEST(SliceWindow, TrainingAndTestingRowCounts) {
  const TimeSeriesTable year = synthesize_weather(365, 600, {}, 3);
  const SeasonWindow summer = season_window(Season::kSummer, 2017);
  const TimeSeriesTable train = slice_window(year, summer, 21, 0);
  const TimeSeriesTable test = slice_window(year, summer, 30, 21);
  EXPECT_EQ(train.size(), 21u * 144u);
  EXPECT_EQ(test.size(), 30u * 144u);
  EXPECT_EQ(train.start(), summer.begin);
  EXPECT_EQ(test.start(), summer.begin + std::chrono::days{21});
}

TEST(SliceWindow, PastSeasonEndIsOutOfRange) {
  const TimeSeriesTable year = synthesize_weather(365, 600, {}, 3);
  const SeasonWindow winter = season_window(Season::kWinter, 2017);
  EXPECT_EQ(code_of([&] { slice_window(year, winter, 30, 80); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code_of([&] { slice_window(year, winter, 91, 0); }), ErrorCode::kOutOfRange);
}

TEST(Resample, BinMeans) {
  const TimeSeriesTable t(at(2017, 1, 1), 600, {"x"}, {{1, 2, 3, 4}});
  const TimeSeriesTable r = resample(t, 1200);
  EXPECT_EQ(r.step_seconds(), 1200);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.column("x")[0], 1.5);
  EXPECT_EQ(r.column("x")[1], 3.5);
}

TEST(Resample, ConstantStaysConstant) {
  const TimeSeriesTable t(at(2017, 1, 1), 600, {"x"}, {std::vector<double>(12, 4.25)});
  for (std::int64_t step : {300, 1200, 1800, 3600}) {
    const TimeSeriesTable r = resample(t, step);
    for (double v : r.column("x")) EXPECT_EQ(v, 4.25);
  }
}

TEST(Resample, IncompatibleStep) {
  const TimeSeriesTable t(at(2017, 1, 1), 600, {"x"}, {{1, 2, 3, 4}});
  EXPECT_EQ(code_of([&] { resample(t, 900); }), ErrorCode::kIncompatibleStep);
}

TEST(Resample, DoubleResamplePreservesCoarseBinMeans) {
  const TimeSeriesTable year = synthesize_weather(10, 600, {}, 5);
  const TimeSeriesTable fine = resample(resample(year, 300), 600);
  const TimeSeriesTable direct = resample(year, 1200);
  const TimeSeriesTable via = resample(fine, 1200);
  for (const std::string& name : year.names()) {
    const auto a = direct.column(name);
    const auto b = via.column(name);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_NEAR(a[i], b[i], 1e-9 * (1.0 + std::abs(a[i])));
    }
  }
}

TEST(Iso8601, RoundTrip) {
  const TimePoint t = at(2017, 6, 15, 13) + std::chrono::seconds{1234};
  EXPECT_EQ(parse_iso8601(format_iso8601(t)), t);
}

}  // namespace
}  // namespace greybox

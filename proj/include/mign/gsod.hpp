#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mign/snapshot.hpp"

namespace mign {

// The six daily variables, in fixed column order. Units after ingestion:
// K, K, K, mb, kn, kn.
enum class Variable { max_temp, min_temp, dewp, slp, wdsp, mxspd };
inline constexpr int kNumVariables = 6;

Variable variable_from_string(const std::string& s);  // "MAX", "MIN", "DEWP", ...
std::string to_string(Variable v);
std::string variable_unit(Variable v);

// Columnar record store, one row per station-day. Station ids are interned;
// missing values are NaN. finalize() sorts rows by (date, station id) and
// must run before snapshots are built.
struct RecordStore {
  std::vector<std::string> id_pool;
  std::vector<std::uint32_t> id;
  std::vector<std::int32_t> date;  // YYYYMMDD
  std::vector<float> lon_rad;
  std::vector<float> lat_rad;
  std::array<std::vector<float>, kNumVariables> value;
  bool finalized = false;

  std::size_t size() const { return date.size(); }
  const std::string& station_id(std::size_t row) const { return id_pool[id[row]]; }
};

struct IngestReport {
  std::size_t files_parsed = 0;
  std::size_t files_failed = 0;
  std::size_t rows_ok = 0;
  std::size_t rows_skipped = 0;
  std::size_t rows_no_coordinates = 0;
  std::map<int, std::size_t> records_per_year;
  std::map<int, std::set<std::int32_t>> dates_per_year;
  std::vector<std::string> errors;

  std::string to_text() const;
};

// Parses one GSOD per-station-year CSV. Throws DataError on a malformed
// header; malformed rows are skipped and counted.
void parse_gsod_csv(std::string_view content, const std::string& filename, RecordStore& store,
                    IngestReport& report);

// Walks a directory of GSOD files: .csv (optionally gzip-compressed) and
// .tar/.tar.gz/.tgz archives of per-station CSVs. Returns a finalized store.
RecordStore ingest_directory(const std::string& dir, IngestReport& report);

void finalize(RecordStore& store);

// Compact binary cache of a finalized store, keyed by a source fingerprint
// and the parser version.
void save_record_cache(const RecordStore& store, const std::string& path,
                       std::uint64_t source_key);
RecordStore load_record_cache(const std::string& path);
std::uint64_t directory_fingerprint(const std::string& dir);

// Calendar helpers on YYYYMMDD ints.
bool valid_ymd(int ymd);
int next_day(int ymd);
int day_difference(int from_ymd, int to_ymd);

struct DateRange {
  int first;  // inclusive, YYYYMMDD
  int last;   // inclusive
};

// All stations reporting a valid value of `variable` on `date`, sorted by
// station id; duplicate ids keep the first row and count a warning. Values
// are z-scored when stats are given. Throws DataError when empty.
StationSnapshot build_snapshot(const RecordStore& store, int date, Variable variable,
                               const NormStats* stats = nullptr,
                               const std::set<std::string>* id_filter = nullptr,
                               std::size_t* duplicate_warnings = nullptr);

// One sample per window of consecutive calendar days with data:
// input_steps days in, output_steps days out. Throws DataError when the
// result would be empty.
Dataset build_dataset(const RecordStore& store, Variable variable, DateRange range,
                      int input_steps, int output_steps, const NormStats& stats,
                      const std::set<std::string>* id_filter = nullptr);

// Deterministic seeded partition of all station ids; the first set receives
// ceil(fraction * n) ids. Both sets come back sorted.
std::pair<std::vector<std::string>, std::vector<std::string>> split_stations(
    const RecordStore& store, double fraction, std::uint64_t seed);

// Population mean/std over all station-day values in range; std floored at
// 1e-6. Requires at least 2 valid values.
NormStats compute_norm_stats(const RecordStore& store, Variable variable, DateRange range);

}  // namespace mign

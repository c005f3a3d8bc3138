#include "mign/gsod.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <zlib.h>

#include "mign/errors.hpp"
#include "mign/geo.hpp"
#include "mign/rng.hpp"

namespace mign {

namespace {

constexpr std::uint32_t kCacheVersion = 1;
constexpr char kCacheMagic[8] = {'M', 'I', 'G', 'N', 'G', 'S', 'D', '1'};

// GSOD sentinel values for missing data: 9999.9 for temperatures and
// pressure, 999.9 for wind speeds.
constexpr double kSentinelBig = 9999.9;
constexpr double kSentinelSmall = 999.9;

struct VariableSpec {
  const char* column;
  double sentinel;
  bool fahrenheit;  // convert F -> K
  double lo, hi;    // sanity bounds after conversion
};

constexpr VariableSpec kVariables[kNumVariables] = {
    {"MAX", kSentinelBig, true, 160.0, 350.0},
    {"MIN", kSentinelBig, true, 160.0, 350.0},
    {"DEWP", kSentinelBig, true, 160.0, 350.0},
    {"SLP", kSentinelBig, false, 850.0, 1100.0},
    {"WDSP", kSentinelSmall, false, 0.0, 200.0},
    {"MXSPD", kSentinelSmall, false, 0.0, 200.0},
};

const char* kVariableNames[kNumVariables] = {"MAX", "MIN", "DEWP", "SLP", "WDSP", "MXSPD"};
const char* kVariableUnits[kNumVariables] = {"K", "K", "K", "mb", "kn", "kn"};

}  // namespace

Variable variable_from_string(const std::string& s) {
  for (int i = 0; i < kNumVariables; ++i)
    if (s == kVariableNames[i]) return static_cast<Variable>(i);
  throw ConfigError("unknown variable: " + s + " (expected MAX, MIN, DEWP, SLP, WDSP or MXSPD)");
}

std::string to_string(Variable v) { return kVariableNames[static_cast<int>(v)]; }
std::string variable_unit(Variable v) { return kVariableUnits[static_cast<int>(v)]; }

// ---------------------------------------------------------------------------
// Calendar helpers.

bool valid_ymd(int ymd) {
  using namespace std::chrono;
  const year_month_day d{year{ymd / 10000}, month{static_cast<unsigned>(ymd / 100 % 100)},
                         day{static_cast<unsigned>(ymd % 100)}};
  return d.ok();
}

namespace {

std::chrono::sys_days to_sys_days(int ymd) {
  using namespace std::chrono;
  const year_month_day d{year{ymd / 10000}, month{static_cast<unsigned>(ymd / 100 % 100)},
                         day{static_cast<unsigned>(ymd % 100)}};
  if (!d.ok()) throw DataError("invalid date: " + std::to_string(ymd));
  return sys_days{d};
}

int from_sys_days(std::chrono::sys_days sd) {
  const std::chrono::year_month_day d{sd};
  return static_cast<int>(d.year()) * 10000 + static_cast<int>(unsigned(d.month())) * 100 +
         static_cast<int>(unsigned(d.day()));
}

}  // namespace

int next_day(int ymd) { return from_sys_days(to_sys_days(ymd) + std::chrono::days{1}); }

int day_difference(int from_ymd, int to_ymd) {
  return static_cast<int>((to_sys_days(to_ymd) - to_sys_days(from_ymd)).count());
}

// ---------------------------------------------------------------------------
// CSV parsing.

namespace {

// Splits one CSV line honoring double quotes; trims surrounding whitespace.
void split_csv_line(std::string_view line, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
}

// Numeric field with optional trailing quality flag characters ('*', 'A'..)
// as found in the MAX/MIN columns.
std::optional<double> parse_numeric(std::string_view s) {
  while (!s.empty() && (s.back() == '*' || std::isalpha(static_cast<unsigned char>(s.back()))))
    s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const std::string tmp(s);
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) return std::nullopt;
  return v;
}

std::optional<int> parse_date_field(std::string_view s) {
  // "2024-01-31" or "20240131"
  int y = 0, m = 0, d = 0;
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    y = std::atoi(std::string(s.substr(0, 4)).c_str());
    m = std::atoi(std::string(s.substr(5, 2)).c_str());
    d = std::atoi(std::string(s.substr(8, 2)).c_str());
  } else if (s.size() == 8) {
    const int v = std::atoi(std::string(s).c_str());
    y = v / 10000;
    m = v / 100 % 100;
    d = v % 100;
  } else {
    return std::nullopt;
  }
  const int ymd = y * 10000 + m * 100 + d;
  if (!valid_ymd(ymd)) return std::nullopt;
  return ymd;
}

double fahrenheit_to_kelvin(double f) { return (f - 32.0) * 5.0 / 9.0 + 273.15; }

std::size_t find_column(const std::vector<std::string>& header, const char* name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return static_cast<std::size_t>(-1);
}

std::uint32_t intern_id(RecordStore& store, std::unordered_map<std::string, std::uint32_t>& map,
                        const std::string& sid) {
  const auto it = map.find(sid);
  if (it != map.end()) return it->second;
  const auto idx = static_cast<std::uint32_t>(store.id_pool.size());
  store.id_pool.push_back(sid);
  map.emplace(sid, idx);
  return idx;
}

using InternMap = std::unordered_map<std::string, std::uint32_t>;

void parse_gsod_csv_impl(std::string_view content, const std::string& filename,
                         RecordStore& store, IngestReport& report, InternMap& intern) {
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= content.size()) return false;
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    line = content.substr(pos, end - pos);
    pos = end + 1;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw DataError("empty GSOD file: " + filename);
  std::vector<std::string> fields;
  split_csv_line(line, fields);

  const std::size_t col_station = find_column(fields, "STATION");
  const std::size_t col_date = find_column(fields, "DATE");
  const std::size_t col_lat = find_column(fields, "LATITUDE");
  const std::size_t col_lon = find_column(fields, "LONGITUDE");
  std::size_t col_var[kNumVariables];
  bool have_any_var = false;
  for (int v = 0; v < kNumVariables; ++v) {
    col_var[v] = find_column(fields, kVariables[v].column);
    have_any_var |= col_var[v] != static_cast<std::size_t>(-1);
  }
  if (col_station == static_cast<std::size_t>(-1) || col_date == static_cast<std::size_t>(-1) ||
      col_lat == static_cast<std::size_t>(-1) || col_lon == static_cast<std::size_t>(-1) ||
      !have_any_var)
    throw DataError("malformed GSOD header in " + filename);

  while (next_line(line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    split_csv_line(line, fields);
    if (fields.size() <= col_lon || fields.size() <= col_date || fields.size() <= col_station) {
      report.rows_skipped++;
      continue;
    }
    const auto date = parse_date_field(fields[col_date]);
    const auto lat = parse_numeric(fields[col_lat]);
    const auto lon = parse_numeric(fields[col_lon]);
    if (!date || fields[col_station].empty()) {
      report.rows_skipped++;
      continue;
    }
    if (!lat || !lon || !(*lat >= -90.0 && *lat <= 90.0)) {
      report.rows_no_coordinates++;
      continue;
    }
    GeoCoord coord;
    try {
      coord = make_geo(*lon, *lat);
    } catch (const DomainError&) {
      report.rows_no_coordinates++;
      continue;
    }

    store.id.push_back(intern_id(store, intern, fields[col_station]));
    store.date.push_back(*date);
    store.lon_rad.push_back(static_cast<float>(coord.lon));
    store.lat_rad.push_back(static_cast<float>(coord.lat));
    for (int v = 0; v < kNumVariables; ++v) {
      float out = std::numeric_limits<float>::quiet_NaN();
      if (col_var[v] != static_cast<std::size_t>(-1) && col_var[v] < fields.size()) {
        const auto raw = parse_numeric(fields[col_var[v]]);
        if (raw && std::abs(*raw - kVariables[v].sentinel) > 1e-6) {
          double val = kVariables[v].fahrenheit ? fahrenheit_to_kelvin(*raw) : *raw;
          if (val >= kVariables[v].lo && val <= kVariables[v].hi)
            out = static_cast<float>(val);
        }
      }
      store.value[v].push_back(out);
    }
    report.rows_ok++;
    const int year = *date / 10000;
    report.records_per_year[year]++;
    report.dates_per_year[year].insert(*date);
  }
  store.finalized = false;
}

}  // namespace

void parse_gsod_csv(std::string_view content, const std::string& filename, RecordStore& store,
                    IngestReport& report) {
  InternMap intern;
  for (std::uint32_t i = 0; i < store.id_pool.size(); ++i) intern[store.id_pool[i]] = i;
  parse_gsod_csv_impl(content, filename, store, report, intern);
}

// ---------------------------------------------------------------------------
// Directory ingestion: plain or gzipped CSVs plus (optionally compressed)
// tar archives of per-station CSVs. gzread passes uncompressed bytes
// through, so one reader covers .tar and .tar.gz alike.

namespace {

std::string read_whole_gz(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open: " + path);
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool bad = n < 0;
  gzclose(f);
  if (bad) throw DataError("decompression failed: " + path);
  return out;
}

std::size_t parse_octal(const char* p, std::size_t n) {
  std::size_t v = 0;
  for (std::size_t i = 0; i < n && p[i]; ++i) {
    if (p[i] == ' ') continue;
    if (p[i] < '0' || p[i] > '7') break;
    v = v * 8 + static_cast<std::size_t>(p[i] - '0');
  }
  return v;
}

template <class Fn>
void for_each_tar_member(const std::string& data, Fn&& fn) {
  std::size_t pos = 0;
  while (pos + 512 <= data.size()) {
    const char* hdr = data.data() + pos;
    bool all_zero = true;
    for (int i = 0; i < 512 && all_zero; ++i) all_zero = hdr[i] == 0;
    if (all_zero) break;
    char name[101] = {0};
    std::memcpy(name, hdr, 100);
    const std::size_t size = parse_octal(hdr + 124, 12);
    const char type = hdr[156];
    pos += 512;
    if (pos + size > data.size()) break;
    if (type == '0' || type == 0) fn(std::string(name), std::string_view(data).substr(pos, size));
    pos += (size + 511) / 512 * 512;
  }
}

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::strlen(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

}  // namespace

void finalize(RecordStore& store) {
  // Sort the id pool so integer id order matches lexicographic order, then
  // sort rows by (date, id). This canonicalizes ingestion order.
  std::vector<std::uint32_t> pool_order(store.id_pool.size());
  std::iota(pool_order.begin(), pool_order.end(), 0u);
  std::sort(pool_order.begin(), pool_order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return store.id_pool[a] < store.id_pool[b];
  });
  std::vector<std::uint32_t> remap(store.id_pool.size());
  std::vector<std::string> sorted_pool(store.id_pool.size());
  for (std::uint32_t i = 0; i < pool_order.size(); ++i) {
    remap[pool_order[i]] = i;
    sorted_pool[i] = std::move(store.id_pool[pool_order[i]]);
  }
  store.id_pool = std::move(sorted_pool);
  for (auto& v : store.id) v = remap[v];

  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (store.date[a] != store.date[b]) return store.date[a] < store.date[b];
    return store.id[a] < store.id[b];
  });

  auto permute = [&](auto& col) {
    using T = typename std::remove_reference_t<decltype(col)>::value_type;
    std::vector<T> next(col.size());
    for (std::size_t i = 0; i < order.size(); ++i) next[i] = col[order[i]];
    col = std::move(next);
  };
  permute(store.id);
  permute(store.date);
  permute(store.lon_rad);
  permute(store.lat_rad);
  for (auto& col : store.value) permute(col);
  store.finalized = true;
}

RecordStore ingest_directory(const std::string& dir, IngestReport& report) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir)) throw DataError("no such directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());

  RecordStore store;
  InternMap intern;
  for (const auto& path : files) {
    const bool is_tar =
        ends_with(path, ".tar") || ends_with(path, ".tar.gz") || ends_with(path, ".tgz");
    const bool is_csv = ends_with(path, ".csv") || ends_with(path, ".csv.gz");
    if (!is_tar && !is_csv) continue;
    try {
      const std::string data = read_whole_gz(path);
      if (is_tar) {
        for_each_tar_member(data, [&](const std::string& name, std::string_view content) {
          if (!ends_with(name, ".csv")) return;
          try {
            parse_gsod_csv_impl(content, path + ":" + name, store, report, intern);
            report.files_parsed++;
          } catch (const DataError& e) {
            report.files_failed++;
            report.errors.push_back(e.what());
          }
        });
      } else {
        parse_gsod_csv_impl(data, path, store, report, intern);
        report.files_parsed++;
      }
    } catch (const DataError& e) {
      report.files_failed++;
      report.errors.push_back(e.what());
    }
  }
  finalize(store);
  return store;
}

std::string IngestReport::to_text() const {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "files parsed: %zu (failed: %zu)\n", files_parsed, files_failed);
  out += buf;
  std::snprintf(buf, sizeof buf, "rows kept: %zu, skipped: %zu, missing coordinates: %zu\n",
                rows_ok, rows_skipped, rows_no_coordinates);
  out += buf;
  out += "per-year daily mean stations:\n";
  for (const auto& [year, count] : records_per_year) {
    const auto it = dates_per_year.find(year);
    const std::size_t days = it == dates_per_year.end() ? 0 : it->second.size();
    std::snprintf(buf, sizeof buf, "  %d: %.1f stations/day over %zu days\n", year,
                  days ? static_cast<double>(count) / days : 0.0, days);
    out += buf;
  }
  for (const auto& e : errors) out += "error: " + e + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Binary cache.

namespace {

template <class T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
  const std::uint64_t n = v.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
}

template <class T>
void read_vec(std::istream& in, std::vector<T>& v) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
}

}  // namespace

void save_record_cache(const RecordStore& store, const std::string& path,
                       std::uint64_t source_key) {
  if (!store.finalized) throw DataError("cache save requires a finalized store");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open cache for writing: " + path);
  out.write(kCacheMagic, sizeof kCacheMagic);
  const std::uint32_t version = kCacheVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&source_key), sizeof source_key);

  std::string blob;
  std::vector<std::uint32_t> id_len;
  id_len.reserve(store.id_pool.size());
  for (const auto& s : store.id_pool) {
    id_len.push_back(static_cast<std::uint32_t>(s.size()));
    blob += s;
  }
  write_vec(out, id_len);
  const std::uint64_t blob_n = blob.size();
  out.write(reinterpret_cast<const char*>(&blob_n), sizeof blob_n);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  write_vec(out, store.id);
  write_vec(out, store.date);
  write_vec(out, store.lon_rad);
  write_vec(out, store.lat_rad);
  for (const auto& col : store.value) write_vec(out, col);
  if (!out) throw DataError("cache write failed: " + path);
}

RecordStore load_record_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof kCacheMagic) != 0)
    throw DataError("not a record cache: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kCacheVersion)
    throw DataError("unsupported cache version " + std::to_string(version));
  std::uint64_t source_key = 0;
  in.read(reinterpret_cast<char*>(&source_key), sizeof source_key);

  RecordStore store;
  std::vector<std::uint32_t> id_len;
  read_vec(in, id_len);
  std::uint64_t blob_n = 0;
  in.read(reinterpret_cast<char*>(&blob_n), sizeof blob_n);
  std::string blob(blob_n, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(blob_n));
  std::size_t pos = 0;
  store.id_pool.reserve(id_len.size());
  for (const auto len : id_len) {
    store.id_pool.push_back(blob.substr(pos, len));
    pos += len;
  }

  read_vec(in, store.id);
  read_vec(in, store.date);
  read_vec(in, store.lon_rad);
  read_vec(in, store.lat_rad);
  for (auto& col : store.value) read_vec(in, col);
  if (!in) throw DataError("truncated record cache: " + path);
  store.finalized = true;
  return store;
}

std::uint64_t directory_fingerprint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> entries;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    entries.push_back(entry.path().string() + ":" + std::to_string(entry.file_size()));
  }
  std::sort(entries.begin(), entries.end());
  // FNV-1a
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& e : entries)
    for (const char c : e) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
  return h;
}

// ---------------------------------------------------------------------------
// Snapshot and dataset construction.

namespace {

// Row range [lo, hi) of a date in the sorted store.
std::pair<std::size_t, std::size_t> date_rows(const RecordStore& store, int date) {
  const auto lo = std::lower_bound(store.date.begin(), store.date.end(), date);
  const auto hi = std::upper_bound(lo, store.date.end(), date);
  return {static_cast<std::size_t>(lo - store.date.begin()),
          static_cast<std::size_t>(hi - store.date.begin())};
}

}  // namespace

StationSnapshot build_snapshot(const RecordStore& store, int date, Variable variable,
                               const NormStats* stats, const std::set<std::string>* id_filter,
                               std::size_t* duplicate_warnings) {
  if (!store.finalized) throw DataError("build_snapshot requires a finalized store");
  const int vi = static_cast<int>(variable);
  const auto [lo, hi] = date_rows(store, date);

  StationSnapshot snap;
  snap.date = date;
  snap.variable = to_string(variable);
  std::uint32_t last_id = 0xffffffffu;
  for (std::size_t r = lo; r < hi; ++r) {
    const float v = store.value[vi][r];
    if (std::isnan(v)) continue;
    if (id_filter && !id_filter->count(store.station_id(r))) continue;
    if (store.id[r] == last_id) {  // rows sorted by id within a date
      if (duplicate_warnings) (*duplicate_warnings)++;
      continue;
    }
    last_id = store.id[r];
    snap.station_ids.push_back(store.station_id(r));
    snap.coords.push_back(GeoCoord{store.lon_rad[r], store.lat_rad[r]});
    double val = v;
    if (stats) val = (val - stats->mean) / stats->std;
    snap.values.push_back(val);
  }
  if (snap.values.empty())
    throw DataError("no stations with " + to_string(variable) + " on " + std::to_string(date));
  return snap;
}

Dataset build_dataset(const RecordStore& store, Variable variable, DateRange range,
                      int input_steps, int output_steps, const NormStats& stats,
                      const std::set<std::string>* id_filter) {
  if (!store.finalized) throw DataError("build_dataset requires a finalized store");
  if (input_steps < 1 || output_steps < 1) throw ConfigError("step counts must be >= 1");
  if (day_difference(range.first, range.last) + 1 < input_steps + output_steps)
    throw DataError("date range shorter than one sample window");

  const int window = input_steps + output_steps;
  Dataset ds;
  ds.variable = to_string(variable);
  ds.stats = stats;

  // Materialize snapshots lazily, one pass over window start days.
  std::map<int, StationSnapshot> snap_cache;
  auto snapshot_at = [&](int date) -> const StationSnapshot* {
    const auto it = snap_cache.find(date);
    if (it != snap_cache.end()) return it->second.size() ? &it->second : nullptr;
    StationSnapshot snap;
    try {
      snap = build_snapshot(store, date, variable, &stats, id_filter);
    } catch (const DataError&) {
      snap_cache.emplace(date, StationSnapshot{});
      return nullptr;
    }
    return &snap_cache.emplace(date, std::move(snap)).first->second;
  };

  for (int start = range.first;;) {
    // Window must fit entirely inside the range.
    int last_needed = start;
    for (int i = 1; i < window; ++i) last_needed = next_day(last_needed);
    if (last_needed > range.last) break;

    bool complete = true;
    std::vector<const StationSnapshot*> days(window);
    int d = start;
    for (int i = 0; i < window && complete; ++i) {
      days[i] = snapshot_at(d);
      complete = days[i] != nullptr;
      d = next_day(d);
    }
    if (complete) {
      Sample sample;
      for (int i = 0; i < input_steps; ++i) sample.inputs.push_back(*days[i]);
      for (int i = 0; i < output_steps; ++i) sample.targets.push_back(*days[input_steps + i]);
      ds.samples.push_back(std::move(sample));
    }
    start = next_day(start);
    // Days before the new window start are never consulted again.
    while (!snap_cache.empty() && snap_cache.begin()->first < start)
      snap_cache.erase(snap_cache.begin());
  }
  if (ds.samples.empty())
    throw DataError("no usable samples for " + to_string(variable) + " in range");
  return ds;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_stations(
    const RecordStore& store, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
  std::vector<std::string> ids = store.id_pool;  // unique by construction
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(ids);
  const std::size_t n_a =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size())));
  std::vector<std::string> a(ids.begin(), ids.begin() + n_a);
  std::vector<std::string> b(ids.begin() + n_a, ids.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {std::move(a), std::move(b)};
}

NormStats compute_norm_stats(const RecordStore& store, Variable variable, DateRange range) {
  const int vi = static_cast<int>(variable);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < store.size(); ++r) {
    if (store.date[r] < range.first || store.date[r] > range.last) continue;
    const float v = store.value[vi][r];
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  if (n < 2) throw DataError("fewer than 2 values for normalization statistics");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t r = 0; r < store.size(); ++r) {
    if (store.date[r] < range.first || store.date[r] > range.last) continue;
    const float v = store.value[vi][r];
    if (std::isnan(v)) continue;
    const double d = v - mean;
    ss += d * d;
  }
  NormStats stats;
  stats.mean = mean;
  stats.std = std::max(1e-6, std::sqrt(ss / static_cast<double>(n)));
  return stats;
}

}  // namespace mign

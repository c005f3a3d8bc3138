#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <zlib.h>

#include "helpers.hpp"
#include "mign/errors.hpp"
#include "mign/gsod.hpp"

using namespace mign;

namespace {

const char* kHeader =
    "\"STATION\",\"DATE\",\"LATITUDE\",\"LONGITUDE\",\"ELEVATION\",\"NAME\",\"TEMP\","
    "\"TEMP_ATTRIBUTES\",\"DEWP\",\"DEWP_ATTRIBUTES\",\"SLP\",\"SLP_ATTRIBUTES\",\"STP\","
    "\"STP_ATTRIBUTES\",\"VISIB\",\"VISIB_ATTRIBUTES\",\"WDSP\",\"WDSP_ATTRIBUTES\",\"MXSPD\","
    "\"GUST\",\"MAX\",\"MAX_ATTRIBUTES\",\"MIN\",\"MIN_ATTRIBUTES\",\"PRCP\","
    "\"PRCP_ATTRIBUTES\",\"SNDP\",\"FRSHTT\"\n";

std::string gsod_row(const std::string& station, const std::string& date, double lat, double lon,
                     const std::string& dewp, const std::string& slp, const std::string& wdsp,
                     const std::string& mxspd, const std::string& max,
                     const std::string& min) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "\"%s\",\"%s\",\"%.4f\",\"%.4f\",\"100.0\",\"TEST STATION\",\"50.0\",\"24\","
                "\"%s\",\"24\",\"%s\",\"24\",\"999.9\",\"0\",\"10.0\",\"24\",\"%s\",\"24\","
                "\"%s\",\"999.9\",\"%s\",\" \",\"%s\",\" \",\"0.00\",\"G\",\"999.9\",\"000000\"\n",
                station.c_str(), date.c_str(), lat, lon, dewp.c_str(), slp.c_str(), wdsp.c_str(),
                mxspd.c_str(), max.c_str(), min.c_str());
  return buf;
}

RecordStore parse_one(const std::string& content, IngestReport& report) {
  RecordStore store;
  parse_gsod_csv(content, "test.csv", store, report);
  finalize(store);
  return store;
}

}  // namespace

TEST_CASE("variable names") {
  CHECK(variable_from_string("MAX") == Variable::max_temp);
  CHECK(variable_from_string("SLP") == Variable::slp);
  CHECK(to_string(Variable::mxspd) == "MXSPD");
  CHECK(variable_unit(Variable::slp) == "mb");
  CHECK_THROWS_AS(variable_from_string("TEMP"), ConfigError);
}

TEST_CASE("calendar helpers") {
  CHECK(next_day(20241231) == 20250101);
  CHECK(next_day(20240228) == 20240229);  // leap year
  CHECK(next_day(20230228) == 20230301);
  CHECK(day_difference(20240101, 20240110) == 9);
  CHECK(valid_ymd(20240229));
  CHECK(!valid_ymd(20230229));
}

TEST_CASE("parsing sentinels, conversions and flags") {
  std::string content = kHeader;
  // MAX 32.0F converts to 273.15 K; trailing '*' flags are stripped.
  content += gsod_row("A1", "2024-01-01", 10.0, 20.0, "50.0", "1013.2", "5.0", "12.0", "32.0*",
                      "20.0");
  // Sentinels for MAX and WDSP.
  content += gsod_row("A2", "2024-01-01", 11.0, 21.0, "50.0", "1013.2", "999.9", "12.0",
                      "9999.9", "20.0");
  IngestReport report;
  const RecordStore store = parse_one(content, report);
  REQUIRE(store.size() == 2);
  CHECK(report.rows_ok == 2);

  const int vmax = static_cast<int>(Variable::max_temp);
  const int vw = static_cast<int>(Variable::wdsp);
  CHECK(store.value[vmax][0] == doctest::Approx(273.15));
  CHECK(std::isnan(store.value[vmax][1]));
  CHECK(store.value[vw][0] == doctest::Approx(5.0));
  CHECK(std::isnan(store.value[vw][1]));
}

TEST_CASE("out-of-bounds values are treated as missing") {
  std::string content = kHeader;
  // 200 F -> 366 K, above the 350 K bound; SLP 700 mb below 850.
  content += gsod_row("B1", "2024-01-02", 0.0, 0.0, "50.0", "700.0", "5.0", "12.0", "200.0",
                      "20.0");
  IngestReport report;
  const RecordStore store = parse_one(content, report);
  REQUIRE(store.size() == 1);
  CHECK(std::isnan(store.value[static_cast<int>(Variable::max_temp)][0]));
  CHECK(std::isnan(store.value[static_cast<int>(Variable::slp)][0]));
  CHECK(!std::isnan(store.value[static_cast<int>(Variable::min_temp)][0]));
}

TEST_CASE("rows with bad coordinates or dates are dropped") {
  std::string content = kHeader;
  content += gsod_row("C1", "2024-01-01", 95.0, 20.0, "50.0", "1000.0", "5.0", "12.0", "70.0",
                      "20.0");  // latitude out of range
  content += gsod_row("C2", "bogus", 10.0, 20.0, "50.0", "1000.0", "5.0", "12.0", "70.0", "20.0");
  content += gsod_row("C3", "2024-01-01", 10.0, 20.0, "50.0", "1000.0", "5.0", "12.0", "70.0",
                      "20.0");
  IngestReport report;
  const RecordStore store = parse_one(content, report);
  CHECK(store.size() == 1);
  CHECK(report.rows_no_coordinates == 1);
  CHECK(report.rows_skipped == 1);
  CHECK(store.station_id(0) == "C3");
}

TEST_CASE("malformed header raises a file-level error") {
  RecordStore store;
  IngestReport report;
  CHECK_THROWS_AS(parse_gsod_csv("\"FOO\",\"BAR\"\n\"1\",\"2\"\n", "bad.csv", store, report),
                  DataError);
}

TEST_CASE("snapshots filter, deduplicate and sort") {
  std::string content = kHeader;
  content += gsod_row("S3", "2024-01-01", 10.0, 20.0, "50.0", "1000.0", "5.0", "12.0", "70.0",
                      "20.0");
  content += gsod_row("S1", "2024-01-01", 11.0, 21.0, "50.0", "9999.9", "5.0", "12.0", "70.0",
                      "20.0");  // SLP missing
  content += gsod_row("S2", "2024-01-01", 12.0, 22.0, "50.0", "1001.0", "5.0", "12.0", "70.0",
                      "20.0");
  content += gsod_row("S2", "2024-01-01", 12.5, 22.5, "50.0", "1002.0", "5.0", "12.0", "70.0",
                      "20.0");  // duplicate id
  IngestReport report;
  const RecordStore store = parse_one(content, report);

  std::size_t dups = 0;
  const StationSnapshot slp = build_snapshot(store, 20240101, Variable::slp, nullptr, nullptr,
                                             &dups);
  CHECK(slp.size() == 2);  // S1 missing SLP
  CHECK(dups == 1);
  CHECK(slp.station_ids[0] == "S2");
  CHECK(slp.station_ids[1] == "S3");
  CHECK(slp.values[0] == doctest::Approx(1001.0));  // first occurrence kept

  const StationSnapshot max = build_snapshot(store, 20240101, Variable::max_temp);
  CHECK(max.size() == 3);

  const std::set<std::string> only{"S3"};
  const StationSnapshot filtered =
      build_snapshot(store, 20240101, Variable::max_temp, nullptr, &only);
  CHECK(filtered.size() == 1);

  CHECK_THROWS_AS(build_snapshot(store, 20240102, Variable::max_temp), DataError);

  NormStats stats{1000.0, 2.0};
  const StationSnapshot normed = build_snapshot(store, 20240101, Variable::slp, &stats);
  CHECK(normed.values[0] == doctest::Approx(0.5));
}

TEST_CASE("dataset windows") {
  std::string content = kHeader;
  auto add_day = [&](const std::string& date) {
    content += gsod_row("D1", date, 10.0, 20.0, "50.0", "1000.0", "5.0", "12.0", "70.0", "20.0");
    content += gsod_row("D2", date, 15.0, 25.0, "50.0", "1000.0", "5.0", "12.0", "71.0", "21.0");
  };

  SUBCASE("three consecutive days give two single-step samples") {
    add_day("2024-03-01");
    add_day("2024-03-02");
    add_day("2024-03-03");
    IngestReport report;
    const RecordStore store = parse_one(content, report);
    const Dataset ds = build_dataset(store, Variable::max_temp, {20240301, 20240303}, 1, 1,
                                     NormStats{});
    CHECK(ds.samples.size() == 2);
    CHECK(ds.samples[0].inputs[0].date == 20240301);
    CHECK(ds.samples[0].targets[0].date == 20240302);
  }

  SUBCASE("a gap day excludes pairs spanning it") {
    add_day("2024-03-01");
    add_day("2024-03-02");
    // no data on 03-03
    add_day("2024-03-04");
    add_day("2024-03-05");
    IngestReport report;
    const RecordStore store = parse_one(content, report);
    const Dataset ds = build_dataset(store, Variable::max_temp, {20240301, 20240305}, 1, 1,
                                     NormStats{});
    CHECK(ds.samples.size() == 2);  // (1,2) and (4,5)
  }

  SUBCASE("multistep window count over ten days") {
    for (int d = 1; d <= 10; ++d) {
      char date[16];
      std::snprintf(date, sizeof date, "2024-03-%02d", d);
      add_day(date);
    }
    IngestReport report;
    const RecordStore store = parse_one(content, report);
    const Dataset ds = build_dataset(store, Variable::max_temp, {20240301, 20240310}, 3, 3,
                                     NormStats{});
    CHECK(ds.samples.size() == 5);  // 10 - (2 + 3) with 3-day inputs
    CHECK(ds.samples[0].inputs.size() == 3);
    CHECK(ds.samples[0].targets.size() == 3);
  }

  SUBCASE("empty result raises") {
    add_day("2024-03-01");
    IngestReport report;
    const RecordStore store = parse_one(content, report);
    CHECK_THROWS_AS(
        build_dataset(store, Variable::max_temp, {20240301, 20240302}, 1, 1, NormStats{}),
        DataError);
  }
}

TEST_CASE("station splits") {
  std::string content = kHeader;
  for (int i = 0; i < 11; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "T%02d", i);
    content += gsod_row(id, "2024-01-01", i * 1.0, i * 2.0, "50.0", "1000.0", "5.0", "12.0",
                        "70.0", "20.0");
  }
  IngestReport report;
  const RecordStore store = parse_one(content, report);

  const auto [a, b] = split_stations(store, 0.5, 7);
  CHECK(a.size() == 6);  // ceil(0.5 * 11)
  CHECK(b.size() == 5);
  std::set<std::string> all(a.begin(), a.end());
  for (const auto& id : b) CHECK(all.insert(id).second);
  CHECK(all.size() == 11);

  const auto [a2, b2] = split_stations(store, 0.5, 7);
  CHECK(a == a2);
  CHECK(b == b2);

  const auto [a3, b3] = split_stations(store, 0.5, 8);
  CHECK((a != a3 || b != b3));
}

TEST_CASE("normalization statistics") {
  std::string content = kHeader;
  // Two values 0 C and ... craft MAX values giving K values with known stats:
  // station values in K: pick F values so K = 273.15 and 275.15.
  content += gsod_row("N1", "2024-01-01", 0.0, 0.0, "50.0", "1000.0", "5.0", "12.0", "32.0",
                      "20.0");
  content += gsod_row("N2", "2024-01-01", 1.0, 1.0, "50.0", "1000.0", "5.0", "12.0", "35.6",
                      "20.0");
  IngestReport report;
  const RecordStore store = parse_one(content, report);
  const NormStats stats = compute_norm_stats(store, Variable::max_temp, {20240101, 20240101});
  CHECK(stats.mean == doctest::Approx(274.15).epsilon(1e-4));
  CHECK(stats.std == doctest::Approx(1.0).epsilon(1e-3));

  // Constant values floor the deviation.
  const NormStats flat = compute_norm_stats(store, Variable::slp, {20240101, 20240101});
  CHECK(flat.std == doctest::Approx(1e-6));

  CHECK_THROWS_AS(compute_norm_stats(store, Variable::max_temp, {20300101, 20300102}), DataError);
}

TEST_CASE("statistical oracle for the normalization path") {
  // Synthetic normal sample through the public interface.
  std::string content = kHeader;
  Rng rng(99);
  for (int i = 0; i < 20000; ++i) {
    // SLP values from N(1000, 2).
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", 1000.0 + 2.0 * rng.normal());
    char id[16];
    std::snprintf(id, sizeof id, "R%05d", i);
    content += gsod_row(id, "2024-01-01", 0.0, 0.0, "50.0", buf, "5.0", "12.0", "70.0", "20.0");
  }
  IngestReport report;
  const RecordStore store = parse_one(content, report);
  const NormStats stats = compute_norm_stats(store, Variable::slp, {20240101, 20240101});
  CHECK(std::abs(stats.mean - 1000.0) < 0.05);
  CHECK(std::abs(stats.std - 2.0) < 0.05);
}

TEST_CASE("ingestion order independence and cache round trip") {
  std::string f1 = kHeader, f2 = kHeader;
  f1 += gsod_row("Z1", "2024-01-01", 10.0, 20.0, "50.0", "1000.0", "5.0", "12.0", "70.0", "20.0");
  f1 += gsod_row("Z1", "2024-01-02", 10.0, 20.0, "50.0", "1001.0", "6.0", "13.0", "71.0", "21.0");
  f2 += gsod_row("Z2", "2024-01-01", 11.0, 21.0, "50.0", "1002.0", "7.0", "14.0", "72.0", "22.0");

  RecordStore s12, s21;
  IngestReport r12, r21;
  parse_gsod_csv(f1, "f1.csv", s12, r12);
  parse_gsod_csv(f2, "f2.csv", s12, r12);
  parse_gsod_csv(f2, "f2.csv", s21, r21);
  parse_gsod_csv(f1, "f1.csv", s21, r21);
  finalize(s12);
  finalize(s21);

  REQUIRE(s12.size() == s21.size());
  CHECK(s12.id_pool == s21.id_pool);
  CHECK(s12.id == s21.id);
  CHECK(s12.date == s21.date);
  for (int v = 0; v < kNumVariables; ++v) {
    for (std::size_t i = 0; i < s12.size(); ++i) {
      const bool n1 = std::isnan(s12.value[v][i]), n2 = std::isnan(s21.value[v][i]);
      CHECK(n1 == n2);
      if (!n1) CHECK(s12.value[v][i] == s21.value[v][i]);
    }
  }

  const std::string cache = "/tmp/mign_test_cache.bin";
  save_record_cache(s12, cache, 1234);
  const RecordStore loaded = load_record_cache(cache);
  CHECK(loaded.id_pool == s12.id_pool);
  CHECK(loaded.date == s12.date);
  CHECK(loaded.finalized);
  std::filesystem::remove(cache);
}

TEST_CASE("all surviving values are finite and inside the sanity bounds") {
  std::string content = kHeader;
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    char id[16], maxs[16], slps[16], wds[16];
    std::snprintf(id, sizeof id, "V%04d", i);
    // A mix of plausible, sentinel and absurd raw values.
    const double pick = rng.uniform();
    std::snprintf(maxs, sizeof maxs, "%.1f", pick < 0.2 ? 9999.9 : rng.uniform(-400.0, 400.0));
    std::snprintf(slps, sizeof slps, "%.1f", rng.uniform(0.0, 2000.0));
    std::snprintf(wds, sizeof wds, "%.1f", pick < 0.1 ? 999.9 : rng.uniform(-10.0, 500.0));
    content += gsod_row(id, "2024-06-01", rng.uniform(-89.0, 89.0), rng.uniform(-179.0, 179.0),
                        "50.0", slps, wds, "12.0", maxs, "20.0");
  }
  IngestReport report;
  const RecordStore store = parse_one(content, report);
  const double lo[kNumVariables] = {160, 160, 160, 850, 0, 0};
  const double hi[kNumVariables] = {350, 350, 350, 1100, 200, 200};
  for (int v = 0; v < kNumVariables; ++v)
    for (const float x : store.value[v]) {
      if (std::isnan(x)) continue;
      CHECK(std::isfinite(x));
      CHECK(x >= lo[v]);
      CHECK(x <= hi[v]);
    }
}

TEST_CASE("directory ingestion with a tar.gz archive") {
  namespace fs = std::filesystem;
  const fs::path dir = "/tmp/mign_gsod_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // A plain CSV.
  {
    std::ofstream out(dir / "plain.csv");
    out << kHeader
        << gsod_row("P1", "2024-02-01", 5.0, 6.0, "50.0", "1000.0", "5.0", "12.0", "70.0",
                    "20.0");
  }

  // A tar.gz with one member CSV.
  {
    std::string member = kHeader;
    member += gsod_row("P2", "2024-02-01", 7.0, 8.0, "50.0", "1001.0", "5.0", "12.0", "71.0",
                       "21.0");
    std::string tar(512, '\0');
    const char* name = "1234567890.csv";
    std::memcpy(tar.data(), name, std::strlen(name));
    std::snprintf(tar.data() + 124, 12, "%011o", static_cast<unsigned>(member.size()));
    tar[156] = '0';
    // tar checksum field: spaces then recompute
    std::memset(tar.data() + 148, ' ', 8);
    unsigned sum = 0;
    for (unsigned char c : tar) sum += c;
    std::snprintf(tar.data() + 148, 8, "%06o", sum);
    tar[155] = ' ';
    tar += member;
    tar.resize((tar.size() + 511) / 512 * 512, '\0');
    tar.append(1024, '\0');

    gzFile gz = gzopen((dir / "archive.tar.gz").c_str(), "wb");
    REQUIRE(gz != nullptr);
    gzwrite(gz, tar.data(), static_cast<unsigned>(tar.size()));
    gzclose(gz);
  }

  IngestReport report;
  const RecordStore store = ingest_directory(dir.string(), report);
  CHECK(report.files_parsed == 2);
  CHECK(store.size() == 2);
  CHECK(store.finalized);
  const auto snap = build_snapshot(store, 20240201, Variable::max_temp);
  CHECK(snap.size() == 2);
  CHECK(snap.station_ids[0] == "P1");
  CHECK(snap.station_ids[1] == "P2");

  const std::uint64_t key1 = directory_fingerprint(dir.string());
  const std::uint64_t key2 = directory_fingerprint(dir.string());
  CHECK(key1 == key2);

  const std::string text = report.to_text();
  CHECK(text.find("files parsed: 2") != std::string::npos);
  fs::remove_all(dir);
}

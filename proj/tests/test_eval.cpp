#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "mign/errors.hpp"
#include "mign/eval.hpp"
#include "mign/healpix.hpp"
#include "mign/train.hpp"

using namespace mign;

namespace {

Dataset shifted_field_dataset(std::size_t n_stations, std::size_t n_samples, double shift,
                              std::uint64_t seed) {
  Dataset ds;
  ds.variable = "MAX";
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto field = test::random_field(2, seed + 10 * s);
    const auto coords = test::random_coords(n_stations, seed + 10 * s + 1);
    std::vector<double> in_values(n_stations), out_values(n_stations);
    for (std::size_t i = 0; i < n_stations; ++i) {
      in_values[i] = field(coords[i]);
      out_values[i] = in_values[i] + shift;
    }
    ds.samples.push_back(test::make_sample(
        test::make_snapshot(coords, in_values, 20240101 + static_cast<int>(s)),
        test::make_snapshot(coords, out_values, 20240102 + static_cast<int>(s))));
  }
  return ds;
}

// Strict structural check of RFC 7946 essentials for a point collection.
void validate_geojson(const nlohmann::json& doc) {
  REQUIRE(doc.at("type") == "FeatureCollection");
  REQUIRE(doc.contains("features"));
  for (const auto& f : doc.at("features")) {
    REQUIRE(f.at("type") == "Feature");
    const auto& g = f.at("geometry");
    REQUIRE(g.at("type") == "Point");
    const auto& c = g.at("coordinates");
    REQUIRE(c.is_array());
    REQUIRE(c.size() == 2);
    const double lon = c.at(0).get<double>(), lat = c.at(1).get<double>();
    CHECK(lon >= -180.0);
    CHECK(lon <= 180.0);
    CHECK(lat >= -90.0);
    CHECK(lat <= 90.0);
    REQUIRE(f.at("properties").is_object());
  }
}

}  // namespace

TEST_CASE("persistence forecast basics") {
  const auto coords = test::random_coords(6, 1);
  StationSnapshot day1 = test::make_snapshot(coords, {280, 281, 282, 283, 284, 285}, 20240101);
  StationSnapshot day2 = test::make_snapshot(coords, {279, 280, 283, 284, 285, 286}, 20240102);

  const auto r = persistence_forecast(day1, day2);
  CHECK(r.fallbacks == 0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(r.predictions[i] == day1.values[i]);

  StationSnapshot empty;
  CHECK_THROWS_AS(persistence_forecast(empty, day2), DataError);
}

TEST_CASE("persistence fallback uses the nearest reporting station") {
  const auto coords = test::random_coords(10, 2);
  std::vector<double> values(10);
  for (std::size_t i = 0; i < 10; ++i) values[i] = 300.0 + i;
  const StationSnapshot day1 = test::make_snapshot(coords, values, 20240101);

  // Target set: three stations absent from day 1.
  const auto new_coords = test::random_coords(3, 5);
  StationSnapshot day2;
  day2.date = 20240102;
  day2.variable = "MAX";
  day2.station_ids = {"X1", "X2", "X3"};
  day2.coords = new_coords;
  day2.values = {0, 0, 0};

  const auto r = persistence_forecast(day1, day2);
  CHECK(r.fallbacks == 3);
  const EdgeList nn = test::knn_brute(coords, new_coords, 1);
  for (std::size_t t = 0; t < 3; ++t) CHECK(r.predictions[t] == values[nn.src[t]]);
}

TEST_CASE("evaluate a perfect and a shifted predictor") {
  const Dataset ds = shifted_field_dataset(20, 3, 1.0, 7);

  Forecaster perfect = [](const Sample& s) {
    return std::vector<std::vector<double>>{s.targets[0].values};
  };
  const MetricsReport p = evaluate(perfect, ds);
  CHECK(p.mse == 0.0);
  CHECK(p.mae == 0.0);
  CHECK(p.n_predictions == 60);

  // Persistence on a field shifted by exactly +1 between days.
  const MetricsReport r = evaluate_persistence(ds);
  CHECK(r.mse == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mae == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.persistence_fallbacks == 0);

  // Determinism: run twice, compare bitwise.
  const MetricsReport r2 = evaluate_persistence(ds);
  CHECK(r.mse == r2.mse);
  CHECK(r.mae == r2.mae);
  for (std::size_t i = 0; i < r.per_station.size(); ++i) {
    CHECK(r.per_station[i].sum_abs == r2.per_station[i].sum_abs);
    CHECK(r.per_station[i].sum_sq == r2.per_station[i].sum_sq);
  }
}

TEST_CASE("denormalization in metrics") {
  Dataset ds = shifted_field_dataset(10, 1, 0.5, 9);
  ds.stats = NormStats{100.0, 4.0};  // errors scale by std
  const MetricsReport r = evaluate_persistence(ds);
  CHECK(r.mae == doctest::Approx(2.0).epsilon(1e-12));  // 0.5 * 4
  CHECK(r.mse == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("rollout equals single-step on one step and composes on two") {
  ModelConfig cfg;
  cfg.mesh_level = 0;
  cfg.k_station_mesh = 3;
  cfg.k_mesh_mesh = 3;
  cfg.sh_degree = 1;
  cfg.hidden = 3;
  cfg.proc_layers = 1;
  const MignModel model = make_model(cfg, 4);
  const LatentSpace latent = make_latent_space(build_mesh(0), cfg);

  const auto c1 = test::random_coords(5, 11);
  const auto c2 = test::random_coords(5, 12);
  const auto c3 = test::random_coords(4, 13);
  const StationSnapshot start = test::make_snapshot(c1, {0.1, 0.2, 0.3, 0.4, 0.5}, 20240101);
  const StationSnapshot t1 = test::make_snapshot(c2, {0, 0, 0, 0, 0}, 20240102);
  const StationSnapshot t2 = test::make_snapshot(c3, {0, 0, 0, 0}, 20240103);

  // One step: identical to forward, bitwise.
  const std::vector<StationSnapshot> one{t1};
  const auto roll1 = autoregressive_rollout(model, latent, start, one);
  const auto direct = forward(start, t1.coords, latent, model);
  CHECK(roll1.size() == 1);
  CHECK(roll1[0] == direct);

  // Two steps: equals manual composition.
  const std::vector<StationSnapshot> two{t1, t2};
  const auto roll2 = autoregressive_rollout(model, latent, start, two);
  StationSnapshot mid = t1;
  mid.values = direct;
  const auto second = forward(mid, t2.coords, latent, model);
  CHECK(roll2[1] == second);
}

TEST_CASE("constant model rolls out constant predictions") {
  ModelConfig cfg;
  cfg.mesh_level = 0;
  cfg.k_station_mesh = 3;
  cfg.k_mesh_mesh = 3;
  cfg.sh_degree = 0;
  cfg.hidden = 2;
  cfg.proc_layers = 1;
  MignModel model = make_model(cfg, 5);
  for (auto& t : parameter_tensors(model)) std::fill(t.data, t.data + t.size, 0.0);
  model.decoder.layers.back().b[0] = 7.5;

  const LatentSpace latent = make_latent_space(build_mesh(0), cfg);
  const auto coords = test::random_coords(5, 21);
  const StationSnapshot start = test::make_snapshot(coords, {1, 2, 3, 4, 5});
  std::vector<StationSnapshot> targets;
  for (int s = 0; s < 3; ++s)
    targets.push_back(test::make_snapshot(test::random_coords(4, 30 + s), {0, 0, 0, 0}));

  const auto preds = autoregressive_rollout(model, latent, start, targets);
  for (const auto& step : preds)
    for (const double p : step) CHECK(p == 7.5);
}

TEST_CASE("regional breakdown") {
  const Dataset ds = shifted_field_dataset(40, 2, 1.0, 31);
  MetricsReport report = evaluate_persistence(ds);

  SUBCASE("one global region captures everything") {
    std::vector<RegionSpec> world{{"world", {{{-180.0, 180.0}}}, {-90.0, 90.0}}};
    regional_breakdown(report, world);
    REQUIRE(report.per_region.size() == 2);
    CHECK(report.per_region[0].second.n == report.n_predictions);
    CHECK(report.per_region[0].second.mse == doctest::Approx(report.mse));
    CHECK(report.per_region[1].second.n == 0);
  }

  SUBCASE("default regions partition the predictions") {
    const auto regions = default_regions();
    regional_breakdown(report, regions);
    std::size_t total = 0;
    for (const auto& [name, g] : report.per_region) total += g.n;
    CHECK(total == report.n_predictions);
  }

  SUBCASE("point-in-box assignment") {
    const auto regions = default_regions();
    const GeoCoord in_africa = make_geo(20.0, 0.0);
    CHECK(region_contains(regions[0], in_africa));
    CHECK(!region_contains(regions[1], in_africa));
    std::size_t assigned = regions.size();
    for (std::size_t r = 0; r < regions.size(); ++r)
      if (region_contains(regions[r], in_africa)) {
        assigned = r;
        break;
      }
    CHECK(regions[assigned].name == "Africa");
  }
}

TEST_CASE("metric recomputation from exported per-prediction errors") {
  const Dataset ds = shifted_field_dataset(25, 4, 0.3, 41);
  EvalOptions opts;
  opts.keep_predictions = true;
  const MetricsReport report = evaluate_persistence(ds, opts);

  const std::string path = "/tmp/mign_pred_errors.csv";
  export_prediction_errors_csv(report, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "date,step,station_id,lon_deg,lat_deg,prediction,truth,error");
  double sum_sq = 0.0, sum_abs = 0.0;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto last = line.rfind(',');
    const double err = std::stod(line.substr(last + 1));
    sum_sq += err * err;
    sum_abs += std::abs(err);
    ++n;
  }
  REQUIRE(n == report.n_predictions);
  CHECK(std::abs(sum_sq / n - report.mse) < 1e-9);
  CHECK(std::abs(sum_abs / n - report.mae) < 1e-9);
  std::filesystem::remove(path);
}

TEST_CASE("station error exports") {
  const Dataset ds = shifted_field_dataset(12, 2, 0.2, 51);
  const MetricsReport report = evaluate_persistence(ds);

  const std::string csv_path = "/tmp/mign_station_errors.csv";
  export_station_errors_csv(report, csv_path);
  std::ifstream in(csv_path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "station_id,lon_deg,lat_deg,mae,n_predictions");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == report.per_station.size());
  std::filesystem::remove(csv_path);

  const std::string gj_path = "/tmp/mign_station_errors.geojson";
  export_station_errors_geojson(report, gj_path);
  std::ifstream gj(gj_path);
  nlohmann::json doc;
  gj >> doc;
  validate_geojson(doc);
  CHECK(doc.at("features").size() == report.per_station.size());
  std::filesystem::remove(gj_path);
}

TEST_CASE("empty report exports cleanly") {
  MetricsReport empty;
  empty.variable = "MAX";

  const std::string csv_path = "/tmp/mign_empty.csv";
  export_station_errors_csv(empty, csv_path);
  std::ifstream in(csv_path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "station_id,lon_deg,lat_deg,mae,n_predictions\n");
  std::filesystem::remove(csv_path);

  const std::string gj_path = "/tmp/mign_empty.geojson";
  export_station_errors_geojson(empty, gj_path);
  std::ifstream gj(gj_path);
  nlohmann::json doc;
  gj >> doc;
  validate_geojson(doc);
  CHECK(doc.at("features").empty());
  std::filesystem::remove(gj_path);
}

TEST_CASE("report json round trip") {
  const Dataset ds = shifted_field_dataset(8, 2, 0.7, 61);
  EvalOptions opts;
  opts.keep_predictions = true;
  MetricsReport report = evaluate_persistence(ds, opts);
  regional_breakdown(report, default_regions());

  const std::string path = "/tmp/mign_report.json";
  save_report_json(report, path);
  const MetricsReport loaded = load_report_json(path);
  CHECK(loaded.variable == report.variable);
  CHECK(loaded.mse == report.mse);
  CHECK(loaded.mae == report.mae);
  CHECK(loaded.n_predictions == report.n_predictions);
  CHECK(loaded.per_station.size() == report.per_station.size());
  CHECK(loaded.per_region.size() == report.per_region.size());
  CHECK(loaded.predictions.size() == report.predictions.size());
  std::filesystem::remove(path);

  const std::string table = report_table(report);
  CHECK(table.find("MAX") != std::string::npos);
}

TEST_CASE("model evaluation produces a full report") {
  ModelConfig cfg;
  cfg.mesh_level = 0;
  cfg.k_station_mesh = 3;
  cfg.k_mesh_mesh = 3;
  cfg.sh_degree = 1;
  cfg.hidden = 3;
  cfg.proc_layers = 1;
  const MignModel model = make_model(cfg, 8);
  const LatentSpace latent = make_latent_space(build_mesh(0), cfg);

  const Dataset ds = shifted_field_dataset(15, 3, 0.1, 71);
  const MetricsReport report = evaluate_model(model, &latent, ds);
  CHECK(report.n_predictions == 45);
  CHECK(std::isfinite(report.mse));
  CHECK(report.per_sample.size() == 3);
  CHECK(report.per_step.size() == 1);
}

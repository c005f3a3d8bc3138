#include "mign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "mign/errors.hpp"
#include "mign/train.hpp"

namespace mign {

std::vector<RegionSpec> default_regions() {
  return {
      {"Africa", {{{-20.0, 55.0}}}, {-35.0, 38.0}},
      {"Asia", {{{55.0, 180.0}}}, {5.0, 80.0}},
      {"Australia", {{{110.0, 155.0}}}, {-45.0, -10.0}},
      {"South America", {{{-82.0, -34.0}}}, {-56.0, 13.0}},
  };
}

bool region_contains(const RegionSpec& region, const GeoCoord& c) {
  const double lon = c.lon * 180.0 / kPi;
  const double lat = c.lat * 180.0 / kPi;
  if (lat < region.lat_deg[0] || lat > region.lat_deg[1]) return false;
  for (const auto& iv : region.lon_deg)
    if (lon >= iv[0] && lon <= iv[1]) return true;
  return false;
}

std::vector<RegionSpec> load_regions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open regions file: " + path);
  nlohmann::json j;
  in >> j;
  std::vector<RegionSpec> regions;
  for (const auto& r : j) {
    RegionSpec spec;
    spec.name = r.at("name").get<std::string>();
    for (const auto& iv : r.at("lon_deg"))
      spec.lon_deg.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    spec.lat_deg = {r.at("lat_deg").at(0).get<double>(), r.at("lat_deg").at(1).get<double>()};
    if (spec.lat_deg[0] < -90.0 || spec.lat_deg[1] > 90.0)
      throw DataError("region latitude outside globe bounds: " + spec.name);
    for (const auto& iv : spec.lon_deg)
      if (iv[0] < -180.0 || iv[1] > 180.0 || iv[0] > iv[1])
        throw DataError("region longitude interval outside globe bounds: " + spec.name);
    regions.push_back(std::move(spec));
  }
  return regions;
}

// ---------------------------------------------------------------------------

namespace {

struct Accumulator {
  std::size_t n = 0;
  double sum_sq = 0.0;
  double sum_abs = 0.0;

  void add(double err) {
    ++n;
    sum_sq += err * err;
    sum_abs += std::abs(err);
  }
  GroupMetrics metrics() const {
    GroupMetrics g;
    g.n = n;
    if (n) {
      g.mse = sum_sq / static_cast<double>(n);
      g.mae = sum_abs / static_cast<double>(n);
    }
    return g;
  }
};

}  // namespace

MetricsReport evaluate(const Forecaster& forecaster, const Dataset& data,
                       const EvalOptions& opts) {
  if (data.samples.empty()) throw DataError("evaluate: empty dataset");
  MetricsReport report;
  report.variable = data.variable;
  const double mean = data.stats.mean, std = data.stats.std;

  Accumulator total;
  std::vector<Accumulator> per_step;
  std::map<std::string, StationErrorStat> stations;

  for (const auto& sample : data.samples) {
    const auto preds = forecaster(sample);
    if (preds.size() != sample.targets.size())
      throw ShapeError("forecaster returned wrong number of steps");
    if (per_step.size() < preds.size()) per_step.resize(preds.size());

    Accumulator sample_acc;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      const auto& target = sample.targets[j];
      if (preds[j].size() != target.size())
        throw ShapeError("forecaster returned wrong prediction count");
      for (std::size_t i = 0; i < target.size(); ++i) {
        const double pred = preds[j][i] * std + mean;
        const double truth = target.values[i] * std + mean;
        const double err = pred - truth;
        total.add(err);
        sample_acc.add(err);
        per_step[j].add(err);

        auto& st = stations[target.station_ids.empty() ? "station-" + std::to_string(i)
                                                       : target.station_ids[i]];
        if (st.n == 0) {
          st.station_id = target.station_ids.empty() ? "station-" + std::to_string(i)
                                                     : target.station_ids[i];
          st.lon_deg = target.coords[i].lon * 180.0 / kPi;
          st.lat_deg = target.coords[i].lat * 180.0 / kPi;
        }
        st.n++;
        st.sum_abs += std::abs(err);
        st.sum_sq += err * err;

        if (opts.keep_predictions) {
          PredictionError pe;
          pe.date = sample.inputs.front().date;
          pe.step = static_cast<int>(j) + 1;
          pe.station_id = st.station_id;
          pe.lon_deg = target.coords[i].lon * 180.0 / kPi;
          pe.lat_deg = target.coords[i].lat * 180.0 / kPi;
          pe.prediction = pred;
          pe.truth = truth;
          report.predictions.push_back(std::move(pe));
        }
      }
    }
    report.per_sample.push_back(SampleMetrics{sample.inputs.front().date, sample_acc.metrics()});
  }

  report.n_predictions = total.n;
  const GroupMetrics g = total.metrics();
  report.mse = g.mse;
  report.mae = g.mae;
  for (const auto& acc : per_step) report.per_step.push_back(acc.metrics());
  for (auto& [id, st] : stations) report.per_station.push_back(std::move(st));
  if (!std::isfinite(report.mse) || !std::isfinite(report.mae) || report.mse < 0.0 ||
      report.mae < 0.0)
    throw NumericError("non-finite aggregate metrics for " + report.variable);
  return report;
}

MetricsReport evaluate_model(const MignModel& model, const LatentSpace* shared,
                             const Dataset& data, const EvalOptions& opts) {
  const Exec ex = opts.ex;
  Forecaster forecaster = [&](const Sample& sample) {
    LatentSpace storage;
    const LatentSpace* latent = shared;
    if (!model.cfg.use_mesh) {
      storage = latent_for_sample(model, sample, nullptr, ex);
      latent = &storage;
    }
    if (!latent) throw ConfigError("mesh model requires a shared latent space");
    std::vector<std::vector<GeoCoord>> sets;
    for (const auto& t : sample.targets) sets.push_back(t.coords);
    return temporal_forward(sample.inputs, sets, *latent, model, ex);
  };
  return evaluate(forecaster, data, opts);
}

PersistenceResult persistence_forecast(const StationSnapshot& input,
                                       const StationSnapshot& target, Exec ex) {
  if (input.size() == 0) throw DataError("persistence: empty input snapshot");
  PersistenceResult result;
  result.predictions.resize(target.size());

  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < target.size(); ++i) {
    // Input snapshots are sorted by station id.
    const auto it = std::lower_bound(input.station_ids.begin(), input.station_ids.end(),
                                     target.station_ids[i]);
    if (it != input.station_ids.end() && *it == target.station_ids[i]) {
      result.predictions[i] =
          input.values[static_cast<std::size_t>(it - input.station_ids.begin())];
    } else {
      misses.push_back(i);
    }
  }
  if (!misses.empty()) {
    std::vector<GeoCoord> miss_coords(misses.size());
    for (std::size_t m = 0; m < misses.size(); ++m) miss_coords[m] = target.coords[misses[m]];
    const auto nearest = nearest_source(input.coords, miss_coords, ex);
    for (std::size_t m = 0; m < misses.size(); ++m)
      result.predictions[misses[m]] = input.values[nearest[m]];
    result.fallbacks = misses.size();
  }
  return result;
}

MetricsReport evaluate_persistence(const Dataset& data, const EvalOptions& opts) {
  std::size_t fallbacks = 0;
  Forecaster forecaster = [&](const Sample& sample) {
    std::vector<std::vector<double>> preds;
    for (const auto& target : sample.targets) {
      auto r = persistence_forecast(sample.inputs.back(), target, opts.ex);
      fallbacks += r.fallbacks;
      preds.push_back(std::move(r.predictions));
    }
    return preds;
  };
  MetricsReport report = evaluate(forecaster, data, opts);
  report.persistence_fallbacks = fallbacks;
  return report;
}

std::vector<std::vector<double>> autoregressive_rollout(const MignModel& model,
                                                        const LatentSpace& latent,
                                                        const StationSnapshot& start,
                                                        std::span<const StationSnapshot> step_targets,
                                                        Exec ex) {
  if (step_targets.empty()) throw DataError("rollout: no target steps");
  if (model.cfg.multistep()) throw ConfigError("rollout requires a single-step model");
  std::vector<std::vector<double>> preds;
  StationSnapshot current = start;
  for (std::size_t s = 0; s < step_targets.size(); ++s) {
    if (step_targets[s].size() == 0) throw DataError("rollout: empty target step");
    preds.push_back(forward(current, step_targets[s].coords, latent, model, ex));
    if (s + 1 < step_targets.size()) {
      current.date = step_targets[s].date;
      current.station_ids = step_targets[s].station_ids;
      current.coords = step_targets[s].coords;
      current.values = preds.back();
    }
  }
  return preds;
}

MetricsReport evaluate_rollout(const MignModel& model, const LatentSpace* shared,
                               const Dataset& data, const EvalOptions& opts) {
  const Exec ex = opts.ex;
  Forecaster forecaster = [&](const Sample& sample) {
    LatentSpace storage;
    const LatentSpace* latent = shared;
    if (!model.cfg.use_mesh) {
      Sample single;
      single.inputs = {sample.inputs.front()};
      storage = latent_for_sample(model, single, nullptr, ex);
      latent = &storage;
    }
    if (!latent) throw ConfigError("mesh model requires a shared latent space");
    return autoregressive_rollout(model, *latent, sample.inputs.front(), sample.targets, ex);
  };
  return evaluate(forecaster, data, opts);
}

void regional_breakdown(MetricsReport& report, std::span<const RegionSpec> regions) {
  std::vector<Accumulator> accs(regions.size() + 1);  // last = "other"
  for (const auto& st : report.per_station) {
    const GeoCoord c = make_geo(st.lon_deg, st.lat_deg);
    std::size_t slot = regions.size();
    for (std::size_t r = 0; r < regions.size(); ++r) {
      if (region_contains(regions[r], c)) {
        slot = r;
        break;
      }
    }
    accs[slot].n += st.n;
    accs[slot].sum_abs += st.sum_abs;
    accs[slot].sum_sq += st.sum_sq;
  }
  report.per_region.clear();
  for (std::size_t r = 0; r < regions.size(); ++r)
    report.per_region.emplace_back(regions[r].name, accs[r].metrics());
  report.per_region.emplace_back("other", accs.back().metrics());
}

// ---------------------------------------------------------------------------
// Exports.

void export_station_errors_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "station_id,lon_deg,lat_deg,mae,n_predictions\n";
  char buf[256];
  for (const auto& st : report.per_station) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%zu\n", st.station_id.c_str(),
                  st.lon_deg, st.lat_deg, st.mae(), st.n);
    out << buf;
  }
  if (!out) throw DataError("write failed: " + path);
}

void export_station_errors_geojson(const MetricsReport& report, const std::string& path) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& st : report.per_station) {
    features.push_back(
        {{"type", "Feature"},
         {"geometry",
          {{"type", "Point"}, {"coordinates", {st.lon_deg, st.lat_deg}}}},
         {"properties",
          {{"station_id", st.station_id},
           {"mae", st.mae()},
           {"n_predictions", st.n}}}});
  }
  const nlohmann::json doc{{"type", "FeatureCollection"}, {"features", features}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw DataError("write failed: " + path);
}

void export_prediction_errors_csv(const MetricsReport& report, const std::string& path) {
  if (report.predictions.empty() && report.n_predictions > 0)
    throw DataError("report lacks per-prediction rows; evaluate with keep_predictions");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "date,step,station_id,lon_deg,lat_deg,prediction,truth,error\n";
  char buf[384];
  for (const auto& p : report.predictions) {
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.date, p.step,
                  p.station_id.c_str(), p.lon_deg, p.lat_deg, p.prediction, p.truth,
                  p.prediction - p.truth);
    out << buf;
  }
  if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// JSON round trip.

namespace {

nlohmann::json group_to_json(const GroupMetrics& g) {
  return {{"n", g.n}, {"mse", g.mse}, {"mae", g.mae}};
}

GroupMetrics group_from_json(const nlohmann::json& j) {
  GroupMetrics g;
  g.n = j.at("n").get<std::size_t>();
  g.mse = j.at("mse").get<double>();
  g.mae = j.at("mae").get<double>();
  return g;
}

}  // namespace

void save_report_json(const MetricsReport& report, const std::string& path) {
  nlohmann::json j;
  j["variable"] = report.variable;
  j["n_predictions"] = report.n_predictions;
  j["mse"] = report.mse;
  j["mae"] = report.mae;
  j["persistence_fallbacks"] = report.persistence_fallbacks;
  j["per_sample"] = nlohmann::json::array();
  for (const auto& s : report.per_sample)
    j["per_sample"].push_back({{"date", s.date}, {"metrics", group_to_json(s.metrics)}});
  j["per_step"] = nlohmann::json::array();
  for (const auto& g : report.per_step) j["per_step"].push_back(group_to_json(g));
  j["per_station"] = nlohmann::json::array();
  for (const auto& st : report.per_station)
    j["per_station"].push_back({{"station_id", st.station_id},
                                {"lon_deg", st.lon_deg},
                                {"lat_deg", st.lat_deg},
                                {"n", st.n},
                                {"sum_abs", st.sum_abs},
                                {"sum_sq", st.sum_sq}});
  j["per_region"] = nlohmann::json::array();
  for (const auto& [name, g] : report.per_region)
    j["per_region"].push_back({{"name", name}, {"metrics", group_to_json(g)}});
  j["predictions"] = nlohmann::json::array();
  for (const auto& p : report.predictions)
    j["predictions"].push_back({{"date", p.date},
                                {"step", p.step},
                                {"station_id", p.station_id},
                                {"lon_deg", p.lon_deg},
                                {"lat_deg", p.lat_deg},
                                {"prediction", p.prediction},
                                {"truth", p.truth}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failed: " + path);
}

MetricsReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  nlohmann::json j;
  in >> j;
  MetricsReport report;
  report.variable = j.at("variable").get<std::string>();
  report.n_predictions = j.at("n_predictions").get<std::size_t>();
  report.mse = j.at("mse").get<double>();
  report.mae = j.at("mae").get<double>();
  report.persistence_fallbacks = j.at("persistence_fallbacks").get<std::size_t>();
  for (const auto& s : j.at("per_sample"))
    report.per_sample.push_back(
        SampleMetrics{s.at("date").get<int>(), group_from_json(s.at("metrics"))});
  for (const auto& g : j.at("per_step")) report.per_step.push_back(group_from_json(g));
  for (const auto& st : j.at("per_station")) {
    StationErrorStat s;
    s.station_id = st.at("station_id").get<std::string>();
    s.lon_deg = st.at("lon_deg").get<double>();
    s.lat_deg = st.at("lat_deg").get<double>();
    s.n = st.at("n").get<std::size_t>();
    s.sum_abs = st.at("sum_abs").get<double>();
    s.sum_sq = st.at("sum_sq").get<double>();
    report.per_station.push_back(std::move(s));
  }
  for (const auto& r : j.at("per_region"))
    report.per_region.emplace_back(r.at("name").get<std::string>(),
                                   group_from_json(r.at("metrics")));
  for (const auto& p : j.at("predictions")) {
    PredictionError pe;
    pe.date = p.at("date").get<int>();
    pe.step = p.at("step").get<int>();
    pe.station_id = p.at("station_id").get<std::string>();
    pe.lon_deg = p.at("lon_deg").get<double>();
    pe.lat_deg = p.at("lat_deg").get<double>();
    pe.prediction = p.at("prediction").get<double>();
    pe.truth = p.at("truth").get<double>();
    report.predictions.push_back(std::move(pe));
  }
  return report;
}

std::string report_table(const MetricsReport& report) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-14s %10s %12s %12s\n", "variable", "n", "MSE", "MAE");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-14s %10zu %12.4f %12.4f\n", report.variable.c_str(),
                report.n_predictions, report.mse, report.mae);
  out += buf;
  if (report.per_step.size() > 1) {
    for (std::size_t s = 0; s < report.per_step.size(); ++s) {
      const auto& g = report.per_step[s];
      std::snprintf(buf, sizeof buf, "  step %-7zu %10zu %12.4f %12.4f\n", s + 1, g.n, g.mse,
                    g.mae);
      out += buf;
    }
  }
  if (!report.per_region.empty()) {
    for (const auto& [name, g] : report.per_region) {
      std::snprintf(buf, sizeof buf, "  %-12s %10zu %12.4f %12.4f\n", name.c_str(), g.n, g.mse,
                    g.mae);
      out += buf;
    }
  }
  if (report.persistence_fallbacks)
    out += "  fallbacks: " + std::to_string(report.persistence_fallbacks) + "\n";
  return out;
}

}  // namespace mign

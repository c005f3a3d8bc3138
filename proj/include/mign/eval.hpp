#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mign/model.hpp"
#include "mign/snapshot.hpp"

namespace mign {

// Geographic box (or union of longitude intervals) in degrees.
struct RegionSpec {
  std::string name;
  std::vector<std::array<double, 2>> lon_deg;
  std::array<double, 2> lat_deg;
};

std::vector<RegionSpec> default_regions();
bool region_contains(const RegionSpec& region, const GeoCoord& c);
std::vector<RegionSpec> load_regions(const std::string& path);  // JSON file

// One prediction/truth pair in denormalized units.
struct PredictionError {
  int date = 0;  // date of the first input day
  int step = 1;  // 1-based output step
  std::string station_id;
  double lon_deg = 0.0, lat_deg = 0.0;
  double prediction = 0.0, truth = 0.0;
};

struct StationErrorStat {
  std::string station_id;
  double lon_deg = 0.0, lat_deg = 0.0;
  std::size_t n = 0;
  double sum_abs = 0.0;
  double sum_sq = 0.0;
  double mae() const { return n ? sum_abs / static_cast<double>(n) : 0.0; }
};

struct GroupMetrics {
  std::size_t n = 0;
  double mse = 0.0;
  double mae = 0.0;
};

struct SampleMetrics {
  int date = 0;
  GroupMetrics metrics;
};

struct MetricsReport {
  std::string variable;
  std::size_t n_predictions = 0;
  double mse = 0.0;
  double mae = 0.0;
  std::vector<SampleMetrics> per_sample;
  std::vector<GroupMetrics> per_step;  // index = step - 1
  std::vector<StationErrorStat> per_station;
  std::vector<std::pair<std::string, GroupMetrics>> per_region;
  std::size_t persistence_fallbacks = 0;
  std::vector<PredictionError> predictions;  // populated when requested
};

struct EvalOptions {
  bool keep_predictions = false;
  Exec ex = default_exec();
};

// Per-sample forecaster returning one prediction vector per output step,
// in normalized units.
using Forecaster = std::function<std::vector<std::vector<double>>(const Sample&)>;

MetricsReport evaluate(const Forecaster& forecaster, const Dataset& data,
                       const EvalOptions& opts = {});

// Model forward per sample. `shared` is the mesh latent; pass nullptr for
// mesh-free models.
MetricsReport evaluate_model(const MignModel& model, const LatentSpace* shared,
                             const Dataset& data, const EvalOptions& opts = {});

// Tomorrow equals today at the same station; stations absent from the input
// day fall back to the nearest reporting station's value.
struct PersistenceResult {
  std::vector<double> predictions;
  std::size_t fallbacks = 0;
};
PersistenceResult persistence_forecast(const StationSnapshot& input,
                                       const StationSnapshot& target,
                                       Exec ex = default_exec());

MetricsReport evaluate_persistence(const Dataset& data, const EvalOptions& opts = {});

// Feeds each step's predictions back as the next day's observations.
// `step_targets` supplies the station sets for steps 1..S.
std::vector<std::vector<double>> autoregressive_rollout(const MignModel& model,
                                                        const LatentSpace& latent,
                                                        const StationSnapshot& start,
                                                        std::span<const StationSnapshot> step_targets,
                                                        Exec ex = default_exec());

// Rollout over a dataset built with 1 input step and S output steps.
MetricsReport evaluate_rollout(const MignModel& model, const LatentSpace* shared,
                               const Dataset& data, const EvalOptions& opts = {});

// Assigns each station to the first region containing it ("other" when
// none does) and fills report.per_region.
void regional_breakdown(MetricsReport& report, std::span<const RegionSpec> regions);

void export_station_errors_csv(const MetricsReport& report, const std::string& path);
void export_station_errors_geojson(const MetricsReport& report, const std::string& path);
// One row per prediction; requires keep_predictions at evaluation time.
void export_prediction_errors_csv(const MetricsReport& report, const std::string& path);

void save_report_json(const MetricsReport& report, const std::string& path);
MetricsReport load_report_json(const std::string& path);

// Aligned text summary for terminals.
std::string report_table(const MetricsReport& report);

}  // namespace mign

#pragma once

#include <string>
#include <vector>

#include "mign/geo.hpp"

namespace mign {

// One day of observations for one variable: parallel lists of station ids,
// coordinates and (normalized) scalar values, sorted by station id.
struct StationSnapshot {
  int date = 0;  // YYYYMMDD; 0 for synthetic data
  std::string variable;
  std::vector<std::string> station_ids;
  std::vector<GeoCoord> coords;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

// Per-variable z-score statistics from the training period.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

// One training/evaluation element: `inputs` are consecutive days ending at
// t (oldest first), `targets` the days t+1..t+m.
struct Sample {
  std::vector<StationSnapshot> inputs;
  std::vector<StationSnapshot> targets;
};

struct Dataset {
  std::string variable;
  NormStats stats;
  std::vector<Sample> samples;
};

}  // namespace mign

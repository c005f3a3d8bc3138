#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mign/geo.hpp"
#include "mign/rng.hpp"
#include "mign/sh.hpp"
#include "mign/snapshot.hpp"

namespace mign::test {

// Brute-force kNN oracle: full all-pairs scan sorted by (chord^2, source
// index), independent of the kd-tree path. Edge distances are great-circle
// radians, matching the library contract.
inline EdgeList knn_brute(std::span<const GeoCoord> sources, std::span<const GeoCoord> targets,
                          std::size_t k, bool self_excluded = false) {
  std::vector<std::array<double, 3>> sv(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) sv[i] = geo_to_unit_vec(sources[i]);

  EdgeList out;
  out.n_sources = sources.size();
  out.n_targets = targets.size();
  out.offsets.assign(targets.size() + 1, 0);
  const std::size_t avail = sources.size() - (self_excluded ? 1 : 0);
  const std::size_t deg = std::min(k, avail);

  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto tv = geo_to_unit_vec(targets[t]);
    std::vector<std::pair<double, std::uint32_t>> all;
    all.reserve(sources.size());
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (self_excluded && s == t) continue;
      const double dx = tv[0] - sv[s][0], dy = tv[1] - sv[s][1], dz = tv[2] - sv[s][2];
      all.emplace_back(dx * dx + dy * dy + dz * dz, static_cast<std::uint32_t>(s));
    }
    std::sort(all.begin(), all.end());
    all.resize(deg);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    for (const auto& [d2, s] : all) {
      out.src.push_back(s);
      out.dist.push_back(great_circle_distance(sources[s], targets[t]));
    }
    out.offsets[t + 1] = out.src.size();
  }
  return out;
}

inline bool edges_equal(const EdgeList& a, const EdgeList& b) {
  return a.offsets == b.offsets && a.src == b.src && a.n_targets == b.n_targets;
}

// Gauss-Legendre nodes and weights on [-1, 1]. Local Legendre recurrence so
// the quadrature stays independent of the library implementation it checks.
inline void gauss_legendre(int n, std::vector<double>& xs, std::vector<double>& ws) {
  xs.resize(n);
  ws.resize(n);
  for (int i = 1; i <= n; ++i) {
    double x = std::cos(kPi * (i - 0.25) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    xs[i - 1] = x;
    ws[i - 1] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

inline std::vector<GeoCoord> random_coords(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GeoCoord> coords(n);
  for (auto& c : coords) {
    const double z = rng.uniform(-1.0, 1.0);
    c = geo_from_radians(rng.uniform(-kPi, kPi), std::asin(z));
  }
  return coords;
}

// Smooth synthetic field: a fixed random combination of the real harmonics
// through `degree`.
struct ShField {
  int degree;
  std::vector<double> w;

  double operator()(const GeoCoord& c) const {
    const auto basis = sh_basis(c, degree);
    double acc = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) acc += w[i] * basis[i];
    return acc;
  }
};

inline ShField random_field(int degree, std::uint64_t seed) {
  Rng rng(seed);
  ShField f;
  f.degree = degree;
  f.w.resize(sh_basis_size(degree));
  for (auto& v : f.w) v = rng.uniform(-1.0, 1.0);
  return f;
}

// Snapshot with zero-padded ids so lexicographic id order equals index
// order.
inline StationSnapshot make_snapshot(std::vector<GeoCoord> coords, std::vector<double> values,
                                     int date = 0, const std::string& variable = "MAX") {
  StationSnapshot snap;
  snap.date = date;
  snap.variable = variable;
  snap.coords = std::move(coords);
  snap.values = std::move(values);
  snap.station_ids.resize(snap.values.size());
  char buf[16];
  for (std::size_t i = 0; i < snap.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "S%06zu", i);
    snap.station_ids[i] = buf;
  }
  return snap;
}

inline Sample make_sample(const StationSnapshot& input, const StationSnapshot& target) {
  Sample s;
  s.inputs = {input};
  s.targets = {target};
  return s;
}

}  // namespace mign::test

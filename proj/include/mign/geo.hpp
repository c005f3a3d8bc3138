#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mign/parallel.hpp"

namespace mign {

inline constexpr double kPi = 3.14159265358979323846;

// A point on the unit sphere: longitude in [-pi, pi], latitude in
// [-pi/2, pi/2], both radians.
struct GeoCoord {
  double lon = 0.0;
  double lat = 0.0;
};

// Degree inputs; longitude wrapped into [-pi, pi], latitude outside
// [-90, 90] throws DomainError.
GeoCoord make_geo(double lon_deg, double lat_deg);

// Same wrapping/validation rules for radian inputs.
GeoCoord geo_from_radians(double lon, double lat);

std::array<double, 3> geo_to_unit_vec(const GeoCoord& c);
GeoCoord unit_vec_to_geo(const std::array<double, 3>& v);

// Haversine great-circle distance in radians; symmetric, in [0, pi].
double great_circle_distance(const GeoCoord& a, const GeoCoord& b);

// Directed edges grouped by target node. Within each target the selected
// sources are stored in ascending source-index order, and aggregation
// downstream follows storage order, so results do not depend on distance
// ties or thread count. `dist` holds great-circle radians per edge.
struct EdgeList {
  std::size_t n_sources = 0;
  std::size_t n_targets = 0;
  std::vector<std::size_t> offsets;  // n_targets + 1
  std::vector<std::uint32_t> src;
  std::vector<double> dist;

  std::size_t edge_count() const { return src.size(); }
  std::size_t degree(std::size_t t) const { return offsets[t + 1] - offsets[t]; }
};

// Edges into each target from its k nearest sources. Selection uses 3D
// chord distance (monotone in arc length); ties break toward the lower
// source index. If there are fewer than k sources, all are used.
EdgeList knn_edges(std::span<const GeoCoord> sources, std::span<const GeoCoord> targets,
                   std::size_t k, Exec ex = default_exec());

// kNN graph over one point set, self-edges excluded. Needs >= 2 points.
EdgeList knn_graph(std::span<const GeoCoord> points, std::size_t k, Exec ex = default_exec());

// Nearest source index per target (same metric and tie rule as knn_edges).
std::vector<std::uint32_t> nearest_source(std::span<const GeoCoord> sources,
                                          std::span<const GeoCoord> targets,
                                          Exec ex = default_exec());

// For each source, the positions of its outgoing edges (ascending), used
// for deterministic scatter in backward passes.
struct EdgeListTranspose {
  std::vector<std::size_t> offsets;   // n_sources + 1
  std::vector<std::size_t> edge_pos;  // index into EdgeList::src/dist
  std::vector<std::uint32_t> tgt;     // target of that edge
};

EdgeListTranspose transpose(const EdgeList& edges);

}  // namespace mign

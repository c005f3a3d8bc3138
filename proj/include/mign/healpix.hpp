#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "mign/geo.hpp"

namespace mign {

// Equal-area pixelization of the sphere in the ring scheme. Only pixel
// centers are materialized; node order is ring order, north to south, west
// to east within each ring.
struct HealpixMesh {
  int level = 0;  // refinement level k
  int nside = 1;  // 2^k
  std::vector<GeoCoord> nodes;
};

// 12 * 4^level pixels.
std::size_t mesh_node_count(int level);

// Levels 0..6 supported (49152 nodes at the cap).
HealpixMesh build_mesh(int level);

// Directed kNN graph over the mesh nodes, self excluded.
EdgeList mesh_graph(const HealpixMesh& mesh, std::size_t k_neighbors,
                    Exec ex = default_exec());

// CSV export: index, lon_deg, lat_deg.
void write_mesh_csv(const HealpixMesh& mesh, std::ostream& out);

}  // namespace mign

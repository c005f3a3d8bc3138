#include "mign/healpix.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "mign/errors.hpp"

namespace mign {

std::size_t mesh_node_count(int level) {
  if (level < 0) throw ConfigError("mesh level must be >= 0");
  return 12ull * (1ull << level) * (1ull << level);
}

// Ring-scheme pixel centers. With n = nside and rings r = 1..4n-1 counted
// from the north pole:
//   polar caps (r < n, mirrored in the south): z = +/-(1 - r^2/(3n^2)),
//     4r pixels at lon = (pi/2r)(j - 1/2)
//   equatorial belt (n <= r <= 3n): z = 4/3 - 2r/(3n), 4n pixels at
//     lon = (pi/2n)(j - s/2), s = (r - n + 1) mod 2
HealpixMesh build_mesh(int level) {
  if (level < 0 || level > 6)
    throw ConfigError("mesh level out of supported range 0..6: " + std::to_string(level));
  const int nside = 1 << level;
  HealpixMesh mesh;
  mesh.level = level;
  mesh.nside = nside;
  mesh.nodes.reserve(mesh_node_count(level));

  for (int r = 1; r <= 4 * nside - 1; ++r) {
    double z;
    int count;
    double step, phase;
    if (r < nside) {
      z = 1.0 - static_cast<double>(r) * r / (3.0 * nside * nside);
      count = 4 * r;
      step = kPi / (2.0 * r);
      phase = 0.5;
    } else if (r <= 3 * nside) {
      z = 4.0 / 3.0 - 2.0 * r / (3.0 * nside);
      count = 4 * nside;
      step = kPi / (2.0 * nside);
      phase = ((r - nside + 1) % 2 == 1) ? 0.5 : 0.0;
    } else {
      const int rs = 4 * nside - r;
      z = -(1.0 - static_cast<double>(rs) * rs / (3.0 * nside * nside));
      count = 4 * rs;
      step = kPi / (2.0 * rs);
      phase = 0.5;
    }
    const double lat = std::asin(z);
    for (int j = 1; j <= count; ++j)
      mesh.nodes.push_back(geo_from_radians(step * (j - phase), lat));
  }
  return mesh;
}

EdgeList mesh_graph(const HealpixMesh& mesh, std::size_t k_neighbors, Exec ex) {
  if (mesh.nodes.size() < 2) throw DataError("mesh_graph: mesh has fewer than 2 nodes");
  if (k_neighbors < 1) throw DomainError("mesh_graph: k_neighbors must be >= 1");
  return knn_graph(mesh.nodes, k_neighbors, ex);
}

void write_mesh_csv(const HealpixMesh& mesh, std::ostream& out) {
  out << "index,lon_deg,lat_deg\n";
  char buf[96];
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i,
                  mesh.nodes[i].lon * 180.0 / kPi, mesh.nodes[i].lat * 180.0 / kPi);
    out << buf;
  }
}

}  // namespace mign

// Kernel benchmark: serial reference path vs OpenMP path. Also verifies
// that both backends produce identical bits before timing them.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "mign/geo.hpp"
#include "mign/healpix.hpp"
#include "mign/mlp.hpp"
#include "mign/model.hpp"
#include "mign/parallel.hpp"
#include "mign/rng.hpp"
#include "mign/sh.hpp"

using namespace mign;

namespace {

using Clock = std::chrono::steady_clock;

double time_of(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double>(Clock::now() - t0).count() / reps;
}

void row(const char* name, double serial_s, double openmp_s, bool identical) {
  std::printf("%-28s %10.1f ms %10.1f ms %7.2fx   %s\n", name, serial_s * 1e3, openmp_s * 1e3,
              serial_s / openmp_s, identical ? "bitwise equal" : "MISMATCH");
}

std::vector<GeoCoord> random_coords(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GeoCoord> coords(n);
  for (auto& c : coords) {
    const double z = rng.uniform(-1.0, 1.0);
    c = geo_from_radians(rng.uniform(-kPi, kPi), std::asin(z));
  }
  return coords;
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", max_threads());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  {
    const auto sources = random_coords(20000, 1);
    const auto targets = random_coords(5000, 2);
    EdgeList es, ep;
    const double ts = time_of(3, [&] { es = knn_edges(sources, targets, 10, Exec::serial); });
    const double tp = time_of(3, [&] { ep = knn_edges(sources, targets, 10, Exec::openmp); });
    row("knn 20k sources, 5k queries", ts, tp, es.src == ep.src && es.dist == ep.dist);
  }

  {
    const auto coords = random_coords(50000, 3);
    Matrix bs, bp;
    const double ts = time_of(3, [&] {
      bs = sh_basis(std::span<const GeoCoord>(coords), 3, Exec::serial);
    });
    const double tp = time_of(3, [&] {
      bp = sh_basis(std::span<const GeoCoord>(coords), 3, Exec::openmp);
    });
    row("sh basis 50k nodes, N=3", ts, tp, bs == bp);
  }

  {
    Rng rng(4);
    const Mlp mlp = make_mlp(128, 64, 64, 1, Activation::silu, rng);
    Matrix x(20000, 128);
    for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
    Matrix ys, yp;
    const double ts = time_of(3, [&] { ys = mlp_forward(mlp, x, nullptr, Exec::serial); });
    const double tp = time_of(3, [&] { yp = mlp_forward(mlp, x, nullptr, Exec::openmp); });
    row("mlp 20k rows 128->64->64", ts, tp, ys == yp);
  }

  {
    ModelConfig cfg;  // paper-scale defaults: level 3, H 64, L 2, N 2, k 10
    const MignModel model = make_model(cfg, 5);
    const LatentSpace latent_s = make_latent_space(build_mesh(cfg.mesh_level), cfg, Exec::serial);
    const auto coords = random_coords(5000, 6);
    Rng rng(7);
    std::vector<double> values(coords.size());
    for (auto& v : values) v = rng.uniform(-1.0, 1.0);
    StationSnapshot snap;
    snap.coords = coords;
    snap.values = values;
    snap.station_ids.resize(coords.size());

    std::vector<double> ps, pp;
    const double ts =
        time_of(2, [&] { ps = forward(snap, coords, latent_s, model, Exec::serial); });
    const double tp =
        time_of(2, [&] { pp = forward(snap, coords, latent_s, model, Exec::openmp); });
    row("forward 5k stations, mesh 768", ts, tp, ps == pp);
  }

  return 0;
}

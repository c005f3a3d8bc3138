#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mign/errors.hpp"
#include "mign/geo.hpp"

using namespace mign;

TEST_CASE("make_geo converts and wraps") {
  const GeoCoord a = make_geo(0.0, 0.0);
  CHECK(a.lon == doctest::Approx(0.0));
  CHECK(a.lat == doctest::Approx(0.0));

  const GeoCoord b = make_geo(180.0, 90.0);
  CHECK(b.lon == doctest::Approx(kPi));
  CHECK(b.lat == doctest::Approx(kPi / 2));

  const GeoCoord c = make_geo(-190.0, 45.0);
  CHECK(c.lon == doctest::Approx(170.0 * kPi / 180.0));
  CHECK(c.lat == doctest::Approx(kPi / 4));

  CHECK_THROWS_AS(make_geo(0.0, 90.5), DomainError);
  CHECK_THROWS_AS(make_geo(0.0, -91.0), DomainError);
}

TEST_CASE("unit vectors") {
  auto v = geo_to_unit_vec(make_geo(0.0, 0.0));
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(0.0));
  CHECK(v[2] == doctest::Approx(0.0));

  v = geo_to_unit_vec(geo_from_radians(kPi / 2, 0.0));
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(1.0));

  v = geo_to_unit_vec(geo_from_radians(1.234, kPi / 2));
  CHECK(std::abs(v[0]) < 1e-12);
  CHECK(std::abs(v[1]) < 1e-12);
  CHECK(v[2] == doctest::Approx(1.0));

  for (const auto& c : test::random_coords(100, 7)) {
    const auto u = geo_to_unit_vec(c);
    const double norm = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    CHECK(std::abs(norm - 1.0) < 1e-12);
  }
}

TEST_CASE("unit vector round trip away from poles") {
  for (const auto& c : test::random_coords(200, 11)) {
    if (std::abs(c.lat) > kPi / 2 - 0.05) continue;
    const GeoCoord back = unit_vec_to_geo(geo_to_unit_vec(c));
    CHECK(std::abs(back.lon - c.lon) < 1e-10);
    CHECK(std::abs(back.lat - c.lat) < 1e-10);
  }
}

TEST_CASE("great-circle distance") {
  const GeoCoord a = make_geo(12.3, 45.6);
  CHECK(great_circle_distance(a, a) == 0.0);

  const GeoCoord np = geo_from_radians(0.0, kPi / 2);
  const GeoCoord sp = geo_from_radians(0.0, -kPi / 2);
  CHECK(great_circle_distance(np, sp) == doctest::Approx(kPi));

  CHECK(great_circle_distance(make_geo(0, 0), geo_from_radians(kPi / 2, 0.0)) ==
        doctest::Approx(kPi / 2));
}

TEST_CASE("distance symmetry and triangle inequality") {
  const auto pts = test::random_coords(60, 3);
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto& a = pts[rng.index(pts.size())];
    const auto& b = pts[rng.index(pts.size())];
    const auto& c = pts[rng.index(pts.size())];
    CHECK(great_circle_distance(a, b) == great_circle_distance(b, a));  // bitwise
    CHECK(great_circle_distance(a, c) <=
          great_circle_distance(a, b) + great_circle_distance(b, c) + 1e-9);
  }
}

TEST_CASE("knn edge cases") {
  const auto targets = test::random_coords(3, 21);
  const std::vector<GeoCoord> one{make_geo(10.0, 10.0)};

  const EdgeList e = knn_edges(one, targets, 5);
  CHECK(e.edge_count() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(e.degree(t) == 1);
    CHECK(e.src[e.offsets[t]] == 0);
  }

  CHECK_THROWS_AS(knn_edges(std::vector<GeoCoord>{}, targets, 1), DataError);
  CHECK_THROWS_AS(knn_edges(one, targets, 0), DomainError);
}

TEST_CASE("knn small instance matches exhaustive scan") {
  const auto sources = test::random_coords(5, 33);
  const auto targets = test::random_coords(3, 44);
  const EdgeList got = knn_edges(sources, targets, 2);
  const EdgeList want = test::knn_brute(sources, targets, 2);
  CHECK(test::edges_equal(got, want));
  for (std::size_t i = 0; i < got.dist.size(); ++i) CHECK(got.dist[i] == want.dist[i]);
}

TEST_CASE("knn matches brute force for 500 points") {
  const auto sources = test::random_coords(500, 101);
  const auto targets = test::random_coords(200, 202);
  for (const std::size_t k : {1ul, 3ul, 10ul}) {
    const EdgeList got = knn_edges(sources, targets, k);
    const EdgeList want = test::knn_brute(sources, targets, k);
    CHECK(test::edges_equal(got, want));
  }
}

TEST_CASE("knn graph excludes self and matches brute force") {
  const auto pts = test::random_coords(120, 55);
  const EdgeList got = knn_graph(pts, 4);
  const EdgeList want = test::knn_brute(pts, pts, 4, /*self_excluded=*/true);
  CHECK(test::edges_equal(got, want));
  for (std::size_t t = 0; t < got.n_targets; ++t)
    for (std::size_t e = got.offsets[t]; e < got.offsets[t + 1]; ++e)
      CHECK(got.src[e] != t);
  CHECK_THROWS_AS(knn_graph(std::vector<GeoCoord>{make_geo(0, 0)}, 1), DataError);
}

TEST_CASE("equidistant sources break ties toward the lower index") {
  const std::vector<GeoCoord> sources{geo_from_radians(0.4, 0.0), geo_from_radians(-0.4, 0.0),
                                      geo_from_radians(0.0, 1.2)};
  const std::vector<GeoCoord> target{geo_from_radians(0.0, 0.0)};
  const EdgeList e = knn_edges(sources, target, 1);
  CHECK(e.degree(0) == 1);
  CHECK(e.src[0] == 0);
}

TEST_CASE("fewer sources than k uses all sources") {
  const auto sources = test::random_coords(3, 9);
  const auto targets = test::random_coords(4, 10);
  const EdgeList e = knn_edges(sources, targets, 10);
  for (std::size_t t = 0; t < 4; ++t) CHECK(e.degree(t) == 3);
}

TEST_CASE("serial and openmp knn agree bitwise") {
  const auto sources = test::random_coords(300, 77);
  const auto targets = test::random_coords(150, 78);
  const EdgeList a = knn_edges(sources, targets, 7, Exec::serial);
  const EdgeList b = knn_edges(sources, targets, 7, Exec::openmp);
  CHECK(test::edges_equal(a, b));
  CHECK(a.dist == b.dist);
}

TEST_CASE("transpose lists every edge exactly once") {
  const auto sources = test::random_coords(40, 13);
  const auto targets = test::random_coords(25, 14);
  const EdgeList e = knn_edges(sources, targets, 3);
  const EdgeListTranspose tr = transpose(e);
  CHECK(tr.edge_pos.size() == e.edge_count());
  std::vector<int> seen(e.edge_count(), 0);
  for (std::size_t s = 0; s < e.n_sources; ++s) {
    for (std::size_t p = tr.offsets[s]; p < tr.offsets[s + 1]; ++p) {
      const std::size_t pos = tr.edge_pos[p];
      CHECK(e.src[pos] == s);
      CHECK(tr.tgt[p] < e.n_targets);
      seen[pos]++;
    }
  }
  for (const int c : seen) CHECK(c == 1);
}

TEST_CASE("nearest_source matches brute scan") {
  const auto sources = test::random_coords(80, 15);
  const auto targets = test::random_coords(50, 16);
  const auto got = nearest_source(sources, targets);
  const EdgeList want = test::knn_brute(sources, targets, 1);
  for (std::size_t t = 0; t < targets.size(); ++t) CHECK(got[t] == want.src[t]);
}

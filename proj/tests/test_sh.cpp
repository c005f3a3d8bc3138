#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "mign/errors.hpp"
#include "mign/sh.hpp"

using namespace mign;

TEST_CASE("legendre polynomials") {
  CHECK(legendre(0, 0.7) == 1.0);
  CHECK(legendre(1, 0.5) == 0.5);
  CHECK(legendre(2, 0.5) == doctest::Approx(-0.125));
  CHECK(legendre(3, -1.0) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(legendre(2, 1.5), DomainError);
  CHECK_THROWS_AS(legendre(-1, 0.0), DomainError);
}

TEST_CASE("associated legendre") {
  for (int n = 0; n <= 5; ++n)
    for (const double x : {-0.9, -0.3, 0.0, 0.4, 1.0})
      CHECK(assoc_legendre(n, 0, x) == doctest::Approx(legendre(n, x)));

  CHECK(assoc_legendre(1, 1, 0.0) == doctest::Approx(-1.0));
  CHECK(assoc_legendre(2, 2, 0.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(assoc_legendre(1, 2, 0.0), DomainError);
}

TEST_CASE("real spherical harmonics reference values") {
  const double y00 = 1.0 / std::sqrt(4.0 * kPi);
  CHECK(real_sh(0, 0, make_geo(12.0, 34.0)) == doctest::Approx(y00));
  CHECK(real_sh(0, 0, make_geo(-120.0, -80.0)) == doctest::Approx(0.2820948).epsilon(1e-6));

  const GeoCoord north = geo_from_radians(0.3, kPi / 2);
  CHECK(real_sh(1, 0, north) == doctest::Approx(std::sqrt(3.0 / (4.0 * kPi))));
  CHECK(real_sh(1, 0, north) == doctest::Approx(0.4886025).epsilon(1e-6));

  CHECK(real_sh(2, -1, geo_from_radians(0.0, 0.7)) == 0.0);
  CHECK_THROWS_AS(real_sh(1, 2, north), DomainError);
}

TEST_CASE("basis length per degree") {
  CHECK(sh_basis_size(0) == 1);
  CHECK(sh_basis_size(1) == 4);
  CHECK(sh_basis_size(2) == 9);
  CHECK(sh_basis_size(3) == 16);
  const GeoCoord c = make_geo(45.0, 45.0);
  for (const int n : {0, 1, 2, 3}) CHECK(sh_basis(c, n).size() == sh_basis_size(n));
  CHECK_THROWS_AS(sh_basis_size(9), ConfigError);
}

TEST_CASE("basis row ordering and first entry") {
  for (const auto& c : test::random_coords(20, 42)) {
    const auto row = sh_basis(c, 3);
    CHECK(row[0] == doctest::Approx(1.0 / std::sqrt(4.0 * kPi)));
    std::size_t i = 0;
    for (int n = 0; n <= 3; ++n)
      for (int m = -n; m <= n; ++m) CHECK(row[i++] == real_sh(n, m, c));
  }
}

TEST_CASE("orthonormality under quadrature") {
  // 256 Gauss-Legendre colatitude nodes x 512 uniform longitudes.
  std::vector<double> xs, ws;
  test::gauss_legendre(256, xs, ws);
  const int n_lon = 512;
  const double dlon = 2.0 * kPi / n_lon;

  const int degree = 3;
  const std::size_t nb = sh_basis_size(degree);
  std::vector<double> gram(nb * nb, 0.0);
  std::vector<double> row(nb);
  for (int i = 0; i < 256; ++i) {
    const double lat = std::asin(xs[i]);
    for (int j = 0; j < n_lon; ++j) {
      const double lon = -kPi + (j + 0.5) * dlon;
      sh_basis_row(geo_from_radians(lon, lat), degree, row.data());
      const double w = ws[i] * dlon;
      for (std::size_t a = 0; a < nb; ++a)
        for (std::size_t b = 0; b < nb; ++b) gram[a * nb + b] += w * row[a] * row[b];
    }
  }
  for (std::size_t a = 0; a < nb; ++a)
    for (std::size_t b = 0; b < nb; ++b)
      CHECK(std::abs(gram[a * nb + b] - (a == b ? 1.0 : 0.0)) < 1e-6);
}

TEST_CASE("sh_embed") {
  const GeoCoord c = make_geo(10.0, 20.0);

  const std::vector<double> zeros(9, 0.0);
  auto out = sh_embed(1.5, c, zeros);
  REQUIRE(out.size() == 10);
  CHECK(out[0] == 1.5);
  for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i] == 0.0);

  const std::vector<double> one(1, 1.0);
  out = sh_embed(2.0, c, one);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == 2.0);
  CHECK(out[1] == doctest::Approx(0.2820948).epsilon(1e-6));

  std::vector<double> onehot(9, 0.0);
  onehot[0] = 1.0;
  out = sh_embed(0.0, c, onehot);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == doctest::Approx(0.2820948).epsilon(1e-6));
  for (std::size_t i = 2; i < out.size(); ++i) CHECK(out[i] == 0.0);

  CHECK_THROWS_AS(sh_embed(0.0, c, std::vector<double>(7, 0.0)), ShapeError);
}

TEST_CASE("sh_embed is linear in the coefficients") {
  const GeoCoord c = make_geo(-30.0, 55.0);
  std::vector<double> w(9);
  Rng rng(5);
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);

  const auto basis = sh_basis(c, 2);
  const double eps = 1e-6;
  for (std::size_t b = 0; b < w.size(); ++b) {
    auto wp = w, wm = w;
    wp[b] += eps;
    wm[b] -= eps;
    const auto up = sh_embed(0.3, c, wp);
    const auto um = sh_embed(0.3, c, wm);
    const double fd = (up[1 + b] - um[1 + b]) / (2.0 * eps);
    const double denom = std::max(1e-8, std::abs(basis[b]));
    CHECK(std::abs(fd - basis[b]) / denom < 1e-6);
  }
}

TEST_CASE("basis matrix matches per-row evaluation") {
  const auto coords = test::random_coords(50, 8);
  const Matrix m = sh_basis(std::span<const GeoCoord>(coords), 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto row = sh_basis(coords[i], 2);
    for (std::size_t b = 0; b < row.size(); ++b) CHECK(m(i, b) == row[b]);
  }
  const Matrix serial = sh_basis(std::span<const GeoCoord>(coords), 2, Exec::serial);
  CHECK(m == serial);
}

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mign/geo.hpp"
#include "mign/tensor.hpp"

namespace mign {

// Legendre polynomial P_n(x) by the three-term recurrence.
double legendre(int n, double x);

// Associated Legendre P_n^m(x), 0 <= m <= n, including the Condon-Shortley
// phase (-1)^m. Stable recurrence: P_m^m seed, then upward in n.
double assoc_legendre(int n, int m, double x);

// Real orthonormal spherical harmonic of degree n, order m in [-n, n],
// evaluated at longitude/latitude. The polar argument is the colatitude
// pi/2 - lat; m != 0 terms carry the sqrt(2) factor so the basis integrates
// to the identity Gram matrix over the sphere.
double real_sh(int n, int m, const GeoCoord& c);

// Number of basis functions through degree N: (N+1)^2.
std::size_t sh_basis_size(int degree_max);

// Basis row in the canonical order (0,0), (1,-1), (1,0), (1,1), (2,-2), ...
void sh_basis_row(const GeoCoord& c, int degree_max, double* out);
std::vector<double> sh_basis(const GeoCoord& c, int degree_max);

// Basis matrix, one row per coordinate.
Matrix sh_basis(std::span<const GeoCoord> coords, int degree_max, Exec ex = default_exec());

// Location embedding [x ; w * Y(c)] (elementwise product), length 1+(N+1)^2.
std::vector<double> sh_embed(double x, const GeoCoord& c, std::span<const double> w);

}  // namespace mign

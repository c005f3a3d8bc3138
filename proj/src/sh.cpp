#include "mign/sh.hpp"

#include <cmath>
#include <string>

#include "mign/errors.hpp"

namespace mign {

namespace {

constexpr int kMaxDegree = 8;

void check_domain(int n, int m, double x) {
  if (n < 0) throw DomainError("legendre degree must be >= 0");
  if (m < 0 || m > n) throw DomainError("legendre order out of range 0..n: " + std::to_string(m));
  if (!(x >= -1.0 && x <= 1.0))
    throw DomainError("legendre argument out of [-1, 1]: " + std::to_string(x));
}

// sqrt((2n+1)/(4pi) * (n-m)!/(n+m)!)
double sh_norm(int n, int m) {
  double ratio = 1.0;
  for (int i = n - m + 1; i <= n + m; ++i) ratio *= i;
  return std::sqrt((2.0 * n + 1.0) / (4.0 * kPi) / ratio);
}

}  // namespace

double legendre(int n, double x) {
  check_domain(n, 0, x);
  if (n == 0) return 1.0;
  double pm2 = 1.0, pm1 = x;
  for (int i = 2; i <= n; ++i) {
    const double p = ((2.0 * i - 1.0) * x * pm1 - (i - 1.0) * pm2) / i;
    pm2 = pm1;
    pm1 = p;
  }
  return pm1;
}

double assoc_legendre(int n, int m, double x) {
  check_domain(n, m, x);
  // P_m^m = (-1)^m (2m-1)!! (1-x^2)^(m/2)
  double pmm = 1.0;
  if (m > 0) {
    const double s = std::sqrt((1.0 - x) * (1.0 + x));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= -fact * s;
      fact += 2.0;
    }
  }
  if (n == m) return pmm;
  // P_{m+1}^m = x (2m+1) P_m^m
  double pm1 = x * (2.0 * m + 1.0) * pmm;
  if (n == m + 1) return pm1;
  double pm2 = pmm, p = 0.0;
  for (int i = m + 2; i <= n; ++i) {
    p = ((2.0 * i - 1.0) * x * pm1 - (i + m - 1.0) * pm2) / (i - m);
    pm2 = pm1;
    pm1 = p;
  }
  return p;
}

double real_sh(int n, int m, const GeoCoord& c) {
  const int am = m < 0 ? -m : m;
  if (am > n) throw DomainError("real_sh order |m| exceeds degree");
  const double x = std::sin(c.lat);  // cos(colatitude)
  const double base = sh_norm(n, am) * assoc_legendre(n, am, x);
  if (m == 0) return base;
  constexpr double sqrt2 = 1.4142135623730951;
  return m > 0 ? sqrt2 * base * std::cos(m * c.lon) : sqrt2 * base * std::sin(am * c.lon);
}

std::size_t sh_basis_size(int degree_max) {
  if (degree_max < 0 || degree_max > kMaxDegree)
    throw ConfigError("spherical harmonics degree out of supported range 0..8: " +
                      std::to_string(degree_max));
  return static_cast<std::size_t>(degree_max + 1) * (degree_max + 1);
}

void sh_basis_row(const GeoCoord& c, int degree_max, double* out) {
  sh_basis_size(degree_max);  // validates the degree
  std::size_t i = 0;
  for (int n = 0; n <= degree_max; ++n)
    for (int m = -n; m <= n; ++m) out[i++] = real_sh(n, m, c);
}

std::vector<double> sh_basis(const GeoCoord& c, int degree_max) {
  std::vector<double> out(sh_basis_size(degree_max));
  sh_basis_row(c, degree_max, out.data());
  return out;
}

Matrix sh_basis(std::span<const GeoCoord> coords, int degree_max, Exec ex) {
  Matrix out(coords.size(), sh_basis_size(degree_max));
  parallel_for(coords.size(), ex,
               [&](std::size_t i) { sh_basis_row(coords[i], degree_max, out.row(i)); });
  return out;
}

std::vector<double> sh_embed(double x, const GeoCoord& c, std::span<const double> w) {
  std::size_t b = w.size();
  const int degree = static_cast<int>(std::lround(std::sqrt(static_cast<double>(b)))) - 1;
  if (degree < 0 || sh_basis_size(degree) != b)
    throw ShapeError("sh_embed: coefficient length is not a perfect square (N+1)^2");
  std::vector<double> out(1 + b);
  out[0] = x;
  sh_basis_row(c, degree, out.data() + 1);
  for (std::size_t i = 0; i < b; ++i) out[1 + i] *= w[i];
  return out;
}

}  // namespace mign

#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <cmath>
#include <vector>

#include "photocal/texture.hpp"

namespace photocal::oracle {

inline double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Gaussian mass of [lo, hi] around x.
inline double cell_mass(double lo, double hi, double x, double s) {
  return phi((hi - x) / s) - phi((lo - x) / s);
}

// Blurred board as white minus the blurred mass of every black cell.
inline double texture_cell_sum(const BoardSpec& b, double u, double v, double su, double sv) {
  double t = 1.0;
  for (int cu = -1; cu < b.cols; ++cu) {
    for (int cv = -1; cv < b.rows; ++cv) {
      if (((cu + cv) % 2 + 2) % 2 != 0) continue;
      t -= cell_mass(cu * b.spacing, (cu + 1) * b.spacing, u, su) *
           cell_mass(cv * b.spacing, (cv + 1) * b.spacing, v, sv);
    }
  }
  return t;
}

// Brute-force blur: the sharp texture sampled `per_unit` times per board
// unit is convolved with a normalized discrete Gaussian (radius 6 sigma) by
// two 1-D passes. Returns values at the (nu x nv) evaluation grid
// u0 + i du, v0 + k dv, row-major in v.
inline std::vector<double> brute_force_blur(const BoardSpec& b, double sigma, int per_unit,
                                            double u0, double du, int nu, double v0, double dv,
                                            int nv) {
  const double h = 1.0 / per_unit;
  const int radius = static_cast<int>(std::ceil(6.0 * sigma / h));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * (k * h / sigma) * (k * h / sigma));
    ksum += kernel[k + radius];
  }
  for (double& w : kernel) w /= ksum;

  // Sample rows needed by the v pass, snapped to the sample lattice.
  auto lattice = [&](double x) { return static_cast<long>(std::floor(x / h)); };
  const long y_lo = lattice(v0) - radius - 1;
  const long y_hi = lattice(v0 + (nv - 1) * dv) + radius + 1;
  const long x_lo = lattice(u0) - radius - 1;
  const long x_hi = lattice(u0 + (nu - 1) * du) + radius + 1;
  const long ny = y_hi - y_lo + 1;
  const long nx = x_hi - x_lo + 1;

  // Evaluation points are placed on sample midpoints to avoid interpolation:
  // the caller passes coordinates that are multiples of h plus h/2.
  std::vector<double> row(nx);
  std::vector<double> pass(static_cast<std::size_t>(ny) * nu);
  for (long yi = 0; yi < ny; ++yi) {
    const double y = (y_lo + yi + 0.5) * h;
    for (long xi = 0; xi < nx; ++xi) row[xi] = texture(b, (x_lo + xi + 0.5) * h, y);
    for (int i = 0; i < nu; ++i) {
      const long c = lattice(u0 + i * du) - x_lo;
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * row[c + k];
      pass[yi * nu + i] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(nu) * nv);
  for (int k = 0; k < nv; ++k) {
    const long c = lattice(v0 + k * dv) - y_lo;
    for (int i = 0; i < nu; ++i) {
      double acc = 0.0;
      for (int m = -radius; m <= radius; ++m) acc += kernel[m + radius] * pass[(c + m) * nu + i];
      out[static_cast<std::size_t>(k) * nu + i] = acc;
    }
  }
  return out;
}

}  // namespace photocal::oracle

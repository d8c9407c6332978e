#pragma once

// Checkerboard texture T(u, v), its analytic Gaussian-blurred version, and the
// stretch factors that convert image-space blur to board units.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "photocal/geometry.hpp"

namespace photocal {

enum class TextureKind { checkerboard };

std::string_view to_string(TextureKind kind);
TextureKind texture_kind_from_string(std::string_view name);

/// Board layout. Interest points (inner corners) form a rows x cols grid with
/// pitch `spacing`; point j (row-major) sits at (col * spacing, row * spacing).
/// Squares extend one pitch beyond the outer corners, followed by a white
/// quiet zone of width `margin`.
struct BoardSpec {
  int rows = 2;
  int cols = 2;
  double spacing = 1.0;
  TextureKind texture_kind = TextureKind::checkerboard;
  double margin = 0.0;

  int num_points() const { return rows * cols; }
  std::array<double, 2> interest_point(int j) const {
    return {(j % cols) * spacing, (j / cols) * spacing};
  }
  // Extent of the printed squares.
  double pattern_u_min() const { return -spacing; }
  double pattern_u_max() const { return cols * spacing; }
  double pattern_v_min() const { return -spacing; }
  double pattern_v_max() const { return rows * spacing; }
  // Pattern plus quiet zone.
  bool on_board(double u, double v) const {
    return u >= pattern_u_min() - margin && u <= pattern_u_max() + margin &&
           v >= pattern_v_min() - margin && v <= pattern_v_max() + margin;
  }
};

/// Throws ConfigError on rows/cols < 2, spacing <= 0 or margin < 0.
void validate(const BoardSpec& spec);

inline constexpr double kSigmaMin = 0.05;  // px

namespace detail {

// Gaussian CDF of dist / sigma; a unit step (0.5 at 0) for sigma == 0.
template <class T>
T smooth_step(const T& dist, const T& sigma) {
  using std::erfc;
  if (!(value_of(sigma) > 0.0)) {
    const double d = value_of(dist);
    return T(d > 0.0 ? 1.0 : (d < 0.0 ? 0.0 : 0.5));
  }
  const T z = dist / sigma;
  if (value_of(z) > 9.0) return T(1.0);
  if (value_of(z) < -9.0) return T(0.0);
  return 0.5 * erfc(z * -0.70710678118654752440);
}

// Number of cells on each side of the evaluation cell included in the
// smoothed square-wave sum. Omitted transitions lie beyond 8 sigma.
inline int window_half_width(double sigma, double spacing) {
  return static_cast<int>(std::ceil(8.0 * std::max(sigma, 0.0) / spacing)) + 1;
}

// Smoothed 1-D profiles along one board axis with cells c in [c_lo, c_hi]
// (cell c spans [c a, (c+1) a), sign +1 on even cells).
//   box: Gaussian-smoothed indicator of the pattern extent
//   wave: Gaussian-smoothed square wave restricted to the pattern extent
template <class T>
void axis_profiles(double spacing, int c_lo, int c_hi, const T& x, const T& sigma,
                   T& box, T& wave) {
  const double xv = value_of(x);
  box = smooth_step(T(spacing * (c_hi + 1)) - x, sigma) - smooth_step(T(spacing * c_lo) - x, sigma);
  const int m = static_cast<int>(std::floor(xv / spacing));
  const int k = window_half_width(value_of(sigma), spacing);
  const int c0 = std::max(m - k, c_lo);
  const int c1 = std::min(m + k, c_hi);
  wave = T(0.0);
  if (c0 > c1) return;
  auto sign = [](int c) { return (c % 2 == 0) ? 1.0 : -1.0; };
  // Telescoped form of sum_c s_c [Phi(x_{c+1}) - Phi(x_c)].
  wave = sign(c1) * smooth_step(T(spacing * (c1 + 1)) - x, sigma) -
         sign(c0) * smooth_step(T(spacing * c0) - x, sigma);
  for (int c = c0 + 1; c <= c1; ++c) {
    wave += (2.0 * sign(c - 1)) * smooth_step(T(spacing * c) - x, sigma);
  }
}

}  // namespace detail

/// Gaussian-blurred checkerboard with per-axis standard deviations in board
/// units. Values lie in [0, 1]; the zero-sigma case is the sharp texture with
/// 0.5 on grid lines.
template <class T>
T texture_blurred(const BoardSpec& spec, const T& u, const T& v, const T& sigma_u,
                  const T& sigma_v) {
  T box_u, wave_u, box_v, wave_v;
  detail::axis_profiles(spec.spacing, -1, spec.cols - 1, u, sigma_u, box_u, wave_u);
  detail::axis_profiles(spec.spacing, -1, spec.rows - 1, v, sigma_v, box_v, wave_v);
  // White everywhere minus the black cells: black = (box + wave)/2 per axis product.
  return 1.0 - 0.5 * (box_u * box_v + wave_u * wave_v);
}

/// Sharp texture: 0 on black cells, 1 on white cells and outside the pattern,
/// 0.5 on grid lines.
double texture(const BoardSpec& spec, double u, double v);

/// Stretch factors (M_u, M_v): norms of the pixel-space derivative of the
/// projected board point with respect to u and v.
template <class T>
std::array<T, 2> projection_stretch(const BasicIntrinsics<T>& c, const Mat3<T>& r,
                                    const std::array<T, 3>& t, const T& u, const T& v) {
  using std::sqrt;
  const auto d = projection_differential(c, r, t, u, v);
  const T mu = sqrt(d[0] * d[0] + d[1] * d[1]);
  const T mv = sqrt(d[2] * d[2] + d[3] * d[3]);
  if (!(value_of(mu) > 0.0) || !(value_of(mv) > 0.0)) {
    throw NumericError("projection_stretch: degenerate differential");
  }
  return {mu, mv};
}

std::array<double, 2> projection_stretch(const CameraIntrinsics& intr, const BoardPose& pose,
                                         double u, double v);

}  // namespace photocal

#pragma once

// Pinhole projection with Brown-Conrady distortion, the inverse mapping from
// pixels to board coordinates, and pose/homography algebra.
//
// The kernels in this header are templated on the scalar type so the same
// code evaluates plain values (double) and forward-mode derivatives (Dual<N>).

#include <array>
#include <cmath>

#include <Eigen/Core>

#include "photocal/dual.hpp"
#include "photocal/errors.hpp"

namespace photocal {

template <class T>
struct BasicIntrinsics {
  T fx{1}, fy{1}, x0{0}, y0{0};
  T k1{0}, k2{0}, p1{0}, p2{0};
};

/// fx, fy, x0, y0 in pixels; k1, k2 radial and p1, p2 tangential coefficients.
using CameraIntrinsics = BasicIntrinsics<double>;

/// Throws DomainError unless fx, fy > 0 and every field is finite.
void validate(const CameraIntrinsics& intr);

template <class T>
struct BasicPose {
  std::array<T, 4> q{T(1), T(0), T(0), T(0)};  // w, x, y, z; need not be unit
  std::array<T, 3> t{T(0), T(0), T(0)};
};

using BoardPose = BasicPose<double>;

struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;
};

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

template <class T>
using Vec2 = std::array<T, 2>;
template <class T>
using Vec3 = std::array<T, 3>;
template <class T>
using Mat3 = std::array<std::array<T, 3>, 3>;

inline constexpr int kUndistortMaxIterations = 50;
inline constexpr double kUndistortStepTolerance = 1e-12;

// ---------------------------------------------------------------------------
// Generic kernels

template <class T>
Vec2<T> distort(const BasicIntrinsics<T>& c, const T& xn, const T& yn) {
  const T r2 = xn * xn + yn * yn;
  const T radial = 1.0 + c.k1 * r2 + c.k2 * r2 * r2;
  const T xy = xn * yn;
  return {xn * radial + 2.0 * c.p1 * xy + c.p2 * (r2 + 2.0 * xn * xn),
          yn * radial + 2.0 * c.p2 * xy + c.p1 * (r2 + 2.0 * yn * yn)};
}

/// Row-major 2x2 Jacobian of distort() with respect to (xn, yn).
template <class T>
std::array<T, 4> distort_jacobian(const BasicIntrinsics<T>& c, const T& xn,
                                  const T& yn) {
  const T r2 = xn * xn + yn * yn;
  const T radial = 1.0 + c.k1 * r2 + c.k2 * r2 * r2;
  const T dradial = 2.0 * (c.k1 + 2.0 * c.k2 * r2);  // d(radial)/dx = x * dradial
  return {radial + xn * xn * dradial + 2.0 * c.p1 * yn + 6.0 * c.p2 * xn,
          xn * yn * dradial + 2.0 * c.p1 * xn + 2.0 * c.p2 * yn,
          xn * yn * dradial + 2.0 * c.p2 * yn + 2.0 * c.p1 * xn,
          radial + yn * yn * dradial + 2.0 * c.p2 * xn + 6.0 * c.p1 * yn};
}

/// Rotation matrix of q / |q|.
template <class T>
Mat3<T> rotation_from_quaternion(const std::array<T, 4>& q) {
  using std::sqrt;
  const T n = sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  const T w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3<T> r;
  r[0] = {1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)};
  r[1] = {2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)};
  r[2] = {2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)};
  return r;
}

template <class T>
Vec3<T> board_point(const Mat3<T>& r, const std::array<T, 3>& t, const T& u,
                    const T& v) {
  return {r[0][0] * u + r[0][1] * v + t[0], r[1][0] * u + r[1][1] * v + t[1],
          r[2][0] * u + r[2][1] * v + t[2]};
}

template <class T>
Vec2<T> project(const BasicIntrinsics<T>& c, const Vec3<T>& p) {
  if (!(value_of(p[2]) > 0.0)) throw DomainError("project: non-positive depth");
  const T xn = p[0] / p[2];
  const T yn = p[1] / p[2];
  const Vec2<T> d = distort(c, xn, yn);
  return {c.fx * d[0] + c.x0, c.fy * d[1] + c.y0};
}

/// Fixed-point inversion of the distortion: xn <- (nd - tangential(xn)) / radial(xn),
/// with a Newton fallback when the iteration does not settle.
NormalizedPoint undistort_iterate(const CameraIntrinsics& c, NormalizedPoint nd);

namespace detail {
template <class T>
BasicIntrinsics<double> values(const BasicIntrinsics<T>& c) {
  return {value_of(c.fx), value_of(c.fy), value_of(c.x0), value_of(c.y0),
          value_of(c.k1), value_of(c.k2), value_of(c.p1), value_of(c.p2)};
}
}  // namespace detail

/// Undistorts nd; derivatives of the result follow the inverse function
/// theorem: the primal is found by fixed-point iteration, then a single
/// linearized correction xn0 + J^-1 (nd - distort(xn0)) carries both the
/// residual polish and the implicit derivative.
template <class T>
Vec2<T> undistort_lifted(const BasicIntrinsics<T>& c, const T& xd, const T& yd) {
  const CameraIntrinsics cv = detail::values(c);
  const NormalizedPoint n0 = undistort_iterate(cv, {value_of(xd), value_of(yd)});
  const auto j = distort_jacobian(cv, n0.x, n0.y);
  const double det = j[0] * j[3] - j[1] * j[2];
  if (!(std::abs(det) > 1e-14)) throw NumericError("undistort: singular distortion Jacobian");
  const Vec2<T> f = distort(c, T(n0.x), T(n0.y));
  const T ex = xd - f[0];
  const T ey = yd - f[1];
  return {n0.x + (j[3] * ex - j[1] * ey) / det, n0.y + (-j[2] * ex + j[0] * ey) / det};
}

/// Inverse of the board-to-normalized-plane homography H = [r1 r2 t], kept
/// as the adjugate plus det(H) so the sign of the ray depth stays available.
template <class T>
struct InverseHomography {
  Mat3<T> adj;
  double det = 0.0;
};

template <class T>
InverseHomography<T> inverse_board_homography(const Mat3<T>& r, const std::array<T, 3>& t) {
  const T& a = r[0][0]; const T& b = r[0][1]; const T& c = t[0];
  const T& d = r[1][0]; const T& e = r[1][1]; const T& f = t[1];
  const T& g = r[2][0]; const T& h = r[2][1]; const T& i = t[2];
  InverseHomography<T> inv;
  inv.adj[0] = {e * i - f * h, c * h - b * i, b * f - c * e};
  inv.adj[1] = {f * g - d * i, a * i - c * g, c * d - a * f};
  inv.adj[2] = {d * h - e * g, b * g - a * h, a * e - b * d};
  inv.det = value_of(a * inv.adj[0][0] + b * inv.adj[1][0] + c * inv.adj[2][0]);
  return inv;
}

/// s (u, v, 1) = adj(H) (xn, yn, 1); the ray depth is det(H) / s.
template <class T>
Vec2<T> normalized_to_board(const InverseHomography<T>& inv, const Vec2<T>& n) {
  const auto& m = inv.adj;
  const T wu = m[0][0] * n[0] + m[0][1] * n[1] + m[0][2];
  const T wv = m[1][0] * n[0] + m[1][1] * n[1] + m[1][2];
  const T w = m[2][0] * n[0] + m[2][1] * n[1] + m[2][2];
  if (!(inv.det * value_of(w) > 0.0)) throw DomainError("pixel_to_board: ray misses the board");
  return {wu / w, wv / w};
}

/// Maps a pixel to board (u, v): normalize, undistort, then apply the
/// inverse board homography.
template <class T>
Vec2<T> pixel_to_board(const BasicIntrinsics<T>& c, const InverseHomography<T>& inv, double px,
                       double py) {
  const T xd = (px - c.x0) / c.fx;
  const T yd = (py - c.y0) / c.fy;
  return normalized_to_board(inv, undistort_lifted(c, xd, yd));
}

template <class T>
Vec2<T> pixel_to_board(const BasicIntrinsics<T>& c, const Mat3<T>& r,
                       const std::array<T, 3>& t, double px, double py) {
  return pixel_to_board(c, inverse_board_homography(r, t), px, py);
}

/// Partial derivatives of the pixel projection of board point (u, v) with
/// respect to u and v: {dx/du, dy/du, dx/dv, dy/dv}.
template <class T>
std::array<T, 4> projection_differential(const BasicIntrinsics<T>& c, const Mat3<T>& r,
                                         const std::array<T, 3>& t, const T& u,
                                         const T& v) {
  const Vec3<T> p = board_point(r, t, u, v);
  if (!(value_of(p[2]) > 0.0)) throw DomainError("projection_differential: non-positive depth");
  const T xn = p[0] / p[2];
  const T yn = p[1] / p[2];
  const auto jd = distort_jacobian(c, xn, yn);
  std::array<T, 4> out;
  for (int col = 0; col < 2; ++col) {
    const T dxn = (r[0][col] - xn * r[2][col]) / p[2];
    const T dyn = (r[1][col] - yn * r[2][col]) / p[2];
    out[2 * col] = c.fx * (jd[0] * dxn + jd[1] * dyn);
    out[2 * col + 1] = c.fy * (jd[2] * dxn + jd[3] * dyn);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Value-level API

PixelPoint project(const CameraIntrinsics& intr, const Eigen::Vector3d& p);
NormalizedPoint distort(const CameraIntrinsics& intr, NormalizedPoint n);

/// Inverse of distort(); throws ConvergenceError if the fixed point is not reached.
NormalizedPoint undistort(const CameraIntrinsics& intr, NormalizedPoint nd);

/// Jacobian of undistort() at nd, via the inverse of the distortion Jacobian.
Eigen::Matrix2d undistort_jacobian(const CameraIntrinsics& intr, NormalizedPoint nd);

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q);
Eigen::Matrix3d rotation(const BoardPose& pose);
Eigen::Vector3d board_point(const BoardPose& pose, double u, double v);

/// H = [r1 r2 t]. Throws NumericError when cond(H) > 1e12.
Eigen::Matrix3d board_homography(const BoardPose& pose);

Eigen::Vector2d pixel_to_board(const CameraIntrinsics& intr, const BoardPose& pose,
                               PixelPoint px);

/// Unit-norm copy of a pose's quaternion with w >= 0.
BoardPose normalized(const BoardPose& pose);

BoardPose pose_from_rotation(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

/// Angle in radians of the relative rotation between two poses.
double rotation_angle_between(const BoardPose& a, const BoardPose& b);

}  // namespace photocal

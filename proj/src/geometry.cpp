#include "photocal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace photocal {

void validate(const CameraIntrinsics& c) {
  for (double x : {c.fx, c.fy, c.x0, c.y0, c.k1, c.k2, c.p1, c.p2}) {
    if (!std::isfinite(x)) throw DomainError("intrinsics: non-finite field");
  }
  if (!(c.fx > 0.0) || !(c.fy > 0.0)) throw DomainError("intrinsics: focal length must be positive");
}

NormalizedPoint undistort_iterate(const CameraIntrinsics& c, NormalizedPoint nd) {
  double x = nd.x;
  double y = nd.y;
  double step = 0.0;
  for (int it = 0; it < kUndistortMaxIterations; ++it) {
    const double r2 = x * x + y * y;
    const double radial = 1.0 + c.k1 * r2 + c.k2 * r2 * r2;
    const double tx = 2.0 * c.p1 * x * y + c.p2 * (r2 + 2.0 * x * x);
    const double ty = 2.0 * c.p2 * x * y + c.p1 * (r2 + 2.0 * y * y);
    const double nx = (nd.x - tx) / radial;
    const double ny = (nd.y - ty) / radial;
    step = std::max(std::abs(nx - x), std::abs(ny - y));
    x = nx;
    y = ny;
    if (!std::isfinite(step)) break;
    if (step < kUndistortStepTolerance) return {x, y};
  }
  // Strong barrel distortion near the frame corners can make the fixed point
  // repel; Newton from the distorted point usually still finds the inverse.
  double nx = nd.x, ny = nd.y;
  for (int it = 0; it < kUndistortMaxIterations; ++it) {
    const Vec2<double> f = distort(c, nx, ny);
    const double ex = nd.x - f[0], ey = nd.y - f[1];
    const auto j = distort_jacobian(c, nx, ny);
    const double det = j[0] * j[3] - j[1] * j[2];
    if (std::hypot(ex, ey) < 1e-14) {
      // Reject roots past the fold of the radial profile.
      const double r2 = nx * nx + ny * ny;
      if (det > 0.0 && 1.0 + c.k1 * r2 + c.k2 * r2 * r2 > 0.0) return {nx, ny};
      break;
    }
    if (!(std::abs(det) > 1e-14)) break;
    nx += (j[3] * ex - j[1] * ey) / det;
    ny += (-j[2] * ex + j[0] * ey) / det;
    if (!std::isfinite(nx) || !std::isfinite(ny)) break;
  }
  const Vec2<double> back = distort(c, x, y);
  const double residual = std::hypot(back[0] - nd.x, back[1] - nd.y);
  throw ConvergenceError("undistort: fixed-point iteration did not converge (step " +
                             std::to_string(step) + ")",
                         x, y, residual);
}

PixelPoint project(const CameraIntrinsics& intr, const Eigen::Vector3d& p) {
  const Vec2<double> px = project(intr, Vec3<double>{p.x(), p.y(), p.z()});
  return {px[0], px[1]};
}

NormalizedPoint distort(const CameraIntrinsics& intr, NormalizedPoint n) {
  const Vec2<double> d = distort(intr, n.x, n.y);
  return {d[0], d[1]};
}

NormalizedPoint undistort(const CameraIntrinsics& intr, NormalizedPoint nd) {
  const Vec2<double> n = undistort_lifted(intr, nd.x, nd.y);
  return {n[0], n[1]};
}

Eigen::Matrix2d undistort_jacobian(const CameraIntrinsics& intr, NormalizedPoint nd) {
  const NormalizedPoint n = undistort(intr, nd);
  const auto j = distort_jacobian(intr, n.x, n.y);
  Eigen::Matrix2d jd;
  jd << j[0], j[1], j[2], j[3];
  const double det = jd.determinant();
  if (!(std::abs(det) > 1e-14)) throw NumericError("undistort_jacobian: singular distortion Jacobian");
  return jd.inverse();
}

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
  if (!(q.norm() > 0.0) || !q.allFinite()) throw DomainError("quat_to_rotation: zero quaternion");
  const Mat3<double> r = rotation_from_quaternion<double>({q[0], q[1], q[2], q[3]});
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = r[i][j];
  return m;
}

Eigen::Matrix3d rotation(const BoardPose& pose) {
  return quat_to_rotation(Eigen::Vector4d(pose.q[0], pose.q[1], pose.q[2], pose.q[3]));
}

Eigen::Vector3d board_point(const BoardPose& pose, double u, double v) {
  const Eigen::Matrix3d r = rotation(pose);
  return r.col(0) * u + r.col(1) * v + Eigen::Vector3d(pose.t[0], pose.t[1], pose.t[2]);
}

Eigen::Matrix3d board_homography(const BoardPose& pose) {
  const Eigen::Matrix3d r = rotation(pose);
  Eigen::Matrix3d h;
  h.col(0) = r.col(0);
  h.col(1) = r.col(1);
  h.col(2) = Eigen::Vector3d(pose.t[0], pose.t[1], pose.t[2]);
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h);
  const auto& s = svd.singularValues();
  if (!(s[2] > 0.0) || s[0] / s[2] > 1e12) {
    throw NumericError("board_homography: near-singular homography");
  }
  return h;
}

Eigen::Vector2d pixel_to_board(const CameraIntrinsics& intr, const BoardPose& pose,
                               PixelPoint px) {
  board_homography(pose);  // conditioning check
  const Mat3<double> r = rotation_from_quaternion(pose.q);
  const Vec2<double> uv = pixel_to_board(intr, r, pose.t, px.x, px.y);
  return {uv[0], uv[1]};
}

BoardPose normalized(const BoardPose& pose) {
  double n = 0.0;
  for (double x : pose.q) n += x * x;
  n = std::sqrt(n);
  if (!(n > 0.0)) throw DomainError("normalized: zero quaternion");
  const double sign = pose.q[0] < 0.0 ? -1.0 : 1.0;
  BoardPose out = pose;
  for (double& x : out.q) x *= sign / n;
  return out;
}

BoardPose pose_from_rotation(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  const Eigen::Quaterniond q(r);
  BoardPose pose;
  pose.q = {q.w(), q.x(), q.y(), q.z()};
  pose.t = {t.x(), t.y(), t.z()};
  return normalized(pose);
}

double rotation_angle_between(const BoardPose& a, const BoardPose& b) {
  const Eigen::Matrix3d rel = rotation(a).transpose() * rotation(b);
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos loses precision near zero; use the skew part there.
  const Eigen::Vector3d w(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * w.norm(), c);
}

}  // namespace photocal

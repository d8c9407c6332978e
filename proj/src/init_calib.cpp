#include "photocal/init_calib.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace photocal {

std::string to_string(DistortionModel m) {
  switch (m) {
    case DistortionModel::none: return "none";
    case DistortionModel::k1k2: return "k1k2";
    case DistortionModel::full: return "full";
  }
  return "unknown";
}

DistortionModel distortion_model_from_string(const std::string& name) {
  if (name == "none") return DistortionModel::none;
  if (name == "k1k2") return DistortionModel::k1k2;
  if (name == "full") return DistortionModel::full;
  throw ConfigError("unknown distortion model '" + name + "' (none, k1k2, full)");
}

std::array<bool, 8> free_intrinsics(DistortionModel m) {
  std::array<bool, 8> f{true, true, true, true, false, false, false, false};
  if (m == DistortionModel::k1k2 || m == DistortionModel::full) f[4] = f[5] = true;
  if (m == DistortionModel::full) f[6] = f[7] = true;
  return f;
}

namespace {

// Isotropic normalization: centroid to origin, mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  if (!(dist > 0.0)) throw EstimationError("estimate_homography: coincident points");
  const double s = std::sqrt(2.0) / dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

Eigen::Vector2d apply(const Eigen::Matrix3d& t, const Eigen::Vector2d& p) {
  return (t * p.homogeneous()).hnormalized();
}

}  // namespace

Eigen::Matrix3d estimate_homography(std::span<const Correspondence> cs) {
  if (cs.size() < 4) throw EstimationError("estimate_homography: need at least 4 correspondences");
  std::vector<Eigen::Vector2d> src, dst;
  for (const auto& c : cs) {
    src.push_back(c.board);
    dst.push_back(c.pixel);
  }
  const Eigen::Matrix3d ts = normalizing_transform(src);
  const Eigen::Matrix3d td = normalizing_transform(dst);
  Eigen::MatrixXd a(2 * cs.size(), 9);
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const Eigen::Vector2d s = apply(ts, src[k]);
    const Eigen::Vector2d d = apply(td, dst[k]);
    a.row(2 * k) << s.x(), s.y(), 1, 0, 0, 0, -d.x() * s.x(), -d.x() * s.y(), -d.x();
    a.row(2 * k + 1) << 0, 0, 0, s.x(), s.y(), 1, -d.y() * s.x(), -d.y() * s.y(), -d.y();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv[7] > 1e-10 * sv[0])) throw EstimationError("estimate_homography: degenerate configuration");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  Eigen::Matrix3d out = td.inverse() * hn * ts;
  out /= out.norm();
  if (out(2, 2) < 0.0) out = -out;
  return out;
}

CameraIntrinsics zhang_intrinsics(std::span<const Eigen::Matrix3d> hs,
                                  std::optional<ImageSize> size) {
  if (hs.size() < 2) throw EstimationError("zhang_intrinsics: need at least 2 homographies");
  // Pixel conditioning N: x' = s (x - c).
  double s = 1.0, cx = 0.0, cy = 0.0;
  if (size) {
    s = 2.0 / (size->width + size->height);
    cx = 0.5 * (size->width - 1);
    cy = 0.5 * (size->height - 1);
  } else {
    double extent = 0.0;
    for (const auto& h : hs) {
      if (std::abs(h(2, 2)) > 0.0) extent = std::max(extent, std::abs(h(0, 2) / h(2, 2)) + std::abs(h(1, 2) / h(2, 2)));
    }
    if (extent > 0.0) s = 1.0 / extent;
  }
  Eigen::Matrix3d n;
  n << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;

  // Unknowns b = (B11, B22, B13, B23, B33) of B = K^-T K^-1 with zero skew.
  auto v = [](const Eigen::Matrix3d& h, int i, int j) {
    const Eigen::Vector3d a = h.col(i), c = h.col(j);
    Eigen::Matrix<double, 1, 5> row;
    row << a[0] * c[0], a[1] * c[1], a[0] * c[2] + a[2] * c[0], a[1] * c[2] + a[2] * c[1],
        a[2] * c[2];
    return row;
  };
  Eigen::MatrixXd sys(2 * hs.size(), 5);
  for (std::size_t k = 0; k < hs.size(); ++k) {
    Eigen::Matrix3d h = n * hs[k];
    h /= h.norm();
    sys.row(2 * k) = v(h, 0, 1);
    sys.row(2 * k + 1) = v(h, 0, 0) - v(h, 1, 1);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv[3] > 1e-10 * sv[0])) {
    throw EstimationError("zhang_intrinsics: ill-conditioned constraint system (degenerate board orientations)");
  }
  Eigen::VectorXd b = svd.matrixV().col(4);
  if (b[0] < 0.0) b = -b;
  const double b11 = b[0], b22 = b[1], b13 = b[2], b23 = b[3], b33 = b[4];
  if (!(b11 > 0.0) || !(b22 > 0.0)) throw EstimationError("zhang_intrinsics: conic is not positive definite");
  const double lambda = b33 - b13 * b13 / b11 - b23 * b23 / b22;
  if (!(lambda > 0.0)) throw EstimationError("zhang_intrinsics: conic is not positive definite");
  CameraIntrinsics k;
  k.fx = std::sqrt(lambda / b11) / s;
  k.fy = std::sqrt(lambda / b22) / s;
  k.x0 = (-b13 / b11) / s + cx;
  k.y0 = (-b23 / b22) / s + cy;
  validate(k);
  return k;
}

BoardPose pose_from_homography(const CameraIntrinsics& intr, const Eigen::Matrix3d& h) {
  validate(intr);
  if (!(std::abs(h.determinant()) > 0.0)) throw EstimationError("pose_from_homography: singular homography");
  Eigen::Matrix3d kinv;
  kinv << 1.0 / intr.fx, 0, -intr.x0 / intr.fx, 0, 1.0 / intr.fy, -intr.y0 / intr.fy, 0, 0, 1;
  const Eigen::Matrix3d m = kinv * h;
  double lambda = 1.0 / m.col(0).norm();
  if (m(2, 2) * lambda < 0.0) lambda = -lambda;
  const Eigen::Vector3d r1 = lambda * m.col(0);
  const Eigen::Vector3d r2 = lambda * m.col(1);
  const Eigen::Vector3d t = lambda * m.col(2);
  if (!(t.z() > 0.0)) throw EstimationError("pose_from_homography: board not in front of camera");
  Eigen::Matrix3d r;
  r << r1, r2, r1.cross(r2);
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d rot = svd.matrixU() * svd.matrixV().transpose();
  if (rot.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) = -u.col(2);
    rot = u * svd.matrixV().transpose();
  }
  return pose_from_rotation(rot, t);
}

Eigen::Matrix3d pixel_homography(const CameraIntrinsics& intr, const BoardPose& pose) {
  Eigen::Matrix3d k;
  k << intr.fx, 0, intr.x0, 0, intr.fy, intr.y0, 0, 0, 1;
  const Eigen::Matrix3d r = rotation(pose);
  Eigen::Matrix3d h;
  h << r.col(0), r.col(1), Eigen::Vector3d(pose.t[0], pose.t[1], pose.t[2]);
  return k * h;
}

std::vector<Correspondence> correspondences(const ImageCorners& corners, const BoardSpec& board) {
  std::vector<Correspondence> out;
  out.reserve(corners.corners.size());
  for (const auto& c : corners.corners) {
    if (c.point_index < 0 || c.point_index >= board.num_points()) {
      throw ConfigError("corner point index " + std::to_string(c.point_index) + " out of range");
    }
    const auto uv = board.interest_point(c.point_index);
    out.push_back({{uv[0], uv[1]}, {c.pixel.x, c.pixel.y}});
  }
  return out;
}

namespace {

constexpr std::size_t kCornerLocal = 15;  // 8 intrinsics + 7 pose
using CornerDual = Dual<kCornerLocal>;

template <class T>
Vec2<T> corner_residual(const BasicIntrinsics<T>& c, const Mat3<T>& r, const std::array<T, 3>& t,
                        double u, double v, PixelPoint observed) {
  const Vec2<T> px = project(c, board_point(r, t, T(u), T(v)));
  return {px[0] - observed.x, px[1] - observed.y};
}

class CornerProblem final : public LeastSquaresProblem {
 public:
  CornerProblem(std::span<const ImageCorners> corners, const BoardSpec& board,
                const std::array<bool, 8>& free)
      : corners_(corners), board_(board) {
    const int n = num_parameters();
    normal_.fixed.assign(n, false);
    for (int k = 0; k < 8; ++k) normal_.fixed[k] = !free[k];
  }

  int num_parameters() const override { return 8 + 7 * static_cast<int>(corners_.size()); }

  double cost(const Eigen::VectorXd& v) override {
    double total = 0.0;
    const BasicIntrinsics<double> c = intrinsics<double>(v);
    for (std::size_t i = 0; i < corners_.size(); ++i) {
      const auto [r, t] = pose<double>(v, i);
      for (const auto& ob : corners_[i].corners) {
        const auto uv = board_.interest_point(ob.point_index);
        try {
          const Vec2<double> e = corner_residual(c, r, t, uv[0], uv[1], ob.pixel);
          total += e[0] * e[0] + e[1] * e[1];
        } catch (const DomainError&) {
          return std::numeric_limits<double>::infinity();
        }
      }
    }
    return total;
  }

  double linearize(const Eigen::VectorXd& v) override {
    const int n = num_parameters();
    normal_.reset(n);
    double total = 0.0;
    const BasicIntrinsics<CornerDual> c = intrinsics<CornerDual>(v);
    for (std::size_t i = 0; i < corners_.size(); ++i) {
      const auto [r, t] = pose<CornerDual>(v, i);
      const int pose_offset = 8 + 7 * static_cast<int>(i);
      auto column = [&](std::size_t k) { return k < 8 ? static_cast<int>(k) : pose_offset + static_cast<int>(k) - 8; };
      for (const auto& ob : corners_[i].corners) {
        const auto uv = board_.interest_point(ob.point_index);
        Vec2<CornerDual> e;
        try {
          e = corner_residual(c, r, t, uv[0], uv[1], ob.pixel);
        } catch (const DomainError&) {
          return std::numeric_limits<double>::infinity();
        }
        for (const auto& res : e) {
          total += res.v * res.v;
          for (std::size_t a = 0; a < kCornerLocal; ++a) {
            if (res.d[a] == 0.0) continue;
            const int ca = column(a);
            normal_.jtr[ca] += res.d[a] * res.v;
            for (std::size_t b = 0; b < kCornerLocal; ++b) {
              normal_.jtj(ca, column(b)) += res.d[a] * res.d[b];
            }
          }
        }
      }
    }
    gradient_ = normal_.jtr;
    for (int k = 0; k < n; ++k) {
      if (normal_.fixed[k]) gradient_[k] = 0.0;
    }
    return total;
  }

  const Eigen::VectorXd& gradient() const override { return gradient_; }
  bool solve_damped(double lambda, Eigen::VectorXd& delta) override { return normal_.solve(lambda, delta); }

 private:
  template <class T>
  BasicIntrinsics<T> intrinsics(const Eigen::VectorXd& v) const {
    std::array<T, 8> p;
    for (std::size_t k = 0; k < 8; ++k) p[k] = seed<T>(v[k], k);
    return {p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]};
  }
  template <class T>
  std::pair<Mat3<T>, std::array<T, 3>> pose(const Eigen::VectorXd& v, std::size_t i) const {
    const int o = 8 + 7 * static_cast<int>(i);
    std::array<T, 4> q;
    std::array<T, 3> t;
    for (std::size_t k = 0; k < 4; ++k) q[k] = seed<T>(v[o + k], 8 + k);
    for (std::size_t k = 0; k < 3; ++k) t[k] = seed<T>(v[o + 4 + k], 12 + k);
    return {rotation_from_quaternion(q), t};
  }
  template <class T>
  static T seed(double value, std::size_t index) {
    if constexpr (std::is_same_v<T, double>) {
      return value;
    } else {
      return T::variable(value, index);
    }
  }

  std::span<const ImageCorners> corners_;
  const BoardSpec& board_;
  DenseNormalEquations normal_;
  Eigen::VectorXd gradient_;
};

Eigen::VectorXd pack_corner_params(const CameraIntrinsics& c, std::span<const BoardPose> poses) {
  Eigen::VectorXd v(8 + 7 * poses.size());
  v.head<8>() << c.fx, c.fy, c.x0, c.y0, c.k1, c.k2, c.p1, c.p2;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    for (int k = 0; k < 4; ++k) v[8 + 7 * i + k] = poses[i].q[k];
    for (int k = 0; k < 3; ++k) v[8 + 7 * i + 4 + k] = poses[i].t[k];
  }
  return v;
}

}  // namespace

double corner_rms(const CameraIntrinsics& intr, std::span<const BoardPose> poses,
                  std::span<const ImageCorners> corners, const BoardSpec& board) {
  if (poses.size() != corners.size()) throw ConfigError("corner_rms: pose/corner count mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    for (const auto& ob : corners[i].corners) {
      const auto uv = board.interest_point(ob.point_index);
      const PixelPoint px = project(intr, board_point(poses[i], uv[0], uv[1]));
      sum += (px.x - ob.pixel.x) * (px.x - ob.pixel.x) + (px.y - ob.pixel.y) * (px.y - ob.pixel.y);
      ++count;
    }
  }
  return count ? std::sqrt(sum / count) : 0.0;
}

CornerCalibration refine_corner_reprojection(const CameraIntrinsics& intr,
                                             std::span<const BoardPose> poses,
                                             std::span<const ImageCorners> corners,
                                             const BoardSpec& board,
                                             const std::array<bool, 8>& free,
                                             const LmOptions& options) {
  if (poses.size() != corners.size()) throw ConfigError("refine_corner_reprojection: pose/corner count mismatch");
  CornerProblem problem(corners, board, free);
  CornerCalibration out;
  out.rms_before = corner_rms(intr, poses, corners, board);
  Eigen::VectorXd v;
  try {
    v = levenberg_marquardt(problem, pack_corner_params(intr, poses), options, out.report);
  } catch (const SolverError& e) {
    throw EstimationError(std::string("corner refinement: ") + e.what());
  }
  out.intrinsics = {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
  for (std::size_t i = 0; i < poses.size(); ++i) {
    BoardPose p;
    for (int k = 0; k < 4; ++k) p.q[k] = v[8 + 7 * i + k];
    for (int k = 0; k < 3; ++k) p.t[k] = v[8 + 7 * i + 4 + k];
    out.poses.push_back(normalized(p));
  }
  if (!std::isfinite(out.report.final_cost)) throw EstimationError("corner refinement diverged");
  validate(out.intrinsics);
  out.rms_after = corner_rms(out.intrinsics, out.poses, corners, board);
  return out;
}

CornerCalibration initial_calibration(std::span<const ImageCorners> corners,
                                      const BoardSpec& board, ImageSize size,
                                      DistortionModel model, const LmOptions& options) {
  validate(board);
  std::vector<Eigen::Matrix3d> hs;
  for (const auto& img : corners) {
    const auto cs = correspondences(img, board);
    if (cs.size() < 4) {
      throw EstimationError("image " + std::to_string(img.image_id) + ": fewer than 4 corners");
    }
    hs.push_back(estimate_homography(cs));
  }
  const CameraIntrinsics k = zhang_intrinsics(hs, size);
  std::vector<BoardPose> poses;
  for (const auto& h : hs) poses.push_back(pose_from_homography(k, h));
  return refine_corner_reprojection(k, poses, corners, board, free_intrinsics(model), options);
}

}  // namespace photocal

#include "photocal/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "photocal/errors.hpp"

namespace photocal {

PerPixelErrorReport per_pixel_reprojection_error(const CameraIntrinsics& truth,
                                                 const CameraIntrinsics& estimate,
                                                 ImageSize size, int stride) {
  validate(truth);
  validate(estimate);
  if (stride < 1) throw ConfigError("per-pixel error: stride must be >= 1");
  if (size.width <= 0 || size.height <= 0) throw ConfigError("per-pixel error: empty image size");
  PerPixelErrorReport rep;
  rep.stride = stride;
  double sum = 0.0;
  for (int y = 0; y < size.height; y += stride) {
    for (int x = 0; x < size.width; x += stride) {
      const NormalizedPoint nd{(x - truth.x0) / truth.fx, (y - truth.y0) / truth.fy};
      NormalizedPoint n;
      try {
        n = undistort(truth, nd);
      } catch (const std::exception&) {
        ++rep.skipped_count;
        continue;
      }
      // P_est(q) - [x y] with the true round trip P_true(q) = [x y] taken as
      // exact, so inversion noise does not leak into the error.
      const NormalizedPoint de = distort(estimate, n);
      const NormalizedPoint dt = distort(truth, n);
      const double dx = (estimate.fx * de.x - truth.fx * dt.x) + (estimate.x0 - truth.x0);
      const double dy = (estimate.fy * de.y - truth.fy * dt.y) + (estimate.y0 - truth.y0);
      const double d2 = dx * dx + dy * dy;
      if (!std::isfinite(d2)) {
        ++rep.skipped_count;
        continue;
      }
      sum += d2;
      rep.max_px = std::max(rep.max_px, std::sqrt(d2));
      ++rep.pixel_count;
    }
  }
  if (rep.pixel_count > 0) rep.rms_px = std::sqrt(sum / static_cast<double>(rep.pixel_count));
  return rep;
}

PoseFit fit_pose_fixed_intrinsics(const CameraIntrinsics& intr, const ImageCorners& corners,
                                  const BoardSpec& board) {
  validate(intr);
  ImageCorners sorted = corners;
  std::sort(sorted.corners.begin(), sorted.corners.end(),
            [](const CornerObservation& a, const CornerObservation& b) {
              return a.point_index < b.point_index;
            });
  if (sorted.corners.size() < 4) {
    throw EstimationError("pose fit: image " + std::to_string(corners.image_id) +
                          " has fewer than 4 corners");
  }
  // Remove distortion so the board-to-pixel map is a pure homography.
  ImageCorners ideal = sorted;
  for (auto& c : ideal.corners) {
    const NormalizedPoint n =
        undistort(intr, {(c.pixel.x - intr.x0) / intr.fx, (c.pixel.y - intr.y0) / intr.fy});
    c.pixel = {intr.fx * n.x + intr.x0, intr.fy * n.y + intr.y0};
  }
  const Eigen::Matrix3d h = estimate_homography(correspondences(ideal, board));
  const BoardPose pose0 = pose_from_homography(intr, h);
  const std::array<bool, 8> fixed{};
  const BoardPose poses[1] = {pose0};
  const ImageCorners views[1] = {sorted};
  const CornerCalibration cc = refine_corner_reprojection(intr, poses, views, board, fixed);
  PoseFit fit;
  fit.pose = cc.poses.at(0);
  fit.rms_px = cc.rms_after;
  fit.corners = static_cast<int>(sorted.corners.size());
  return fit;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

TestsetReport testset_reprojection(const CameraIntrinsics& intr,
                                   std::span<const ImageCorners> testset, const BoardSpec& board) {
  std::vector<const ImageCorners*> order;
  for (const auto& t : testset) order.push_back(&t);
  std::sort(order.begin(), order.end(),
            [](const ImageCorners* a, const ImageCorners* b) { return a->image_id < b->image_id; });
  TestsetReport rep;
  std::vector<double> values;
  for (const ImageCorners* t : order) {
    const PoseFit fit = fit_pose_fixed_intrinsics(intr, *t, board);
    rep.images.push_back({t->image_id, fit.rms_px});
    values.push_back(fit.rms_px);
  }
  rep.aggregate = mean_std(values);
  return rep;
}

}  // namespace photocal

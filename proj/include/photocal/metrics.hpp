#pragma once

// Ground-truth and test-set error measures for a calibration.

#include <span>
#include <vector>

#include "photocal/geometry.hpp"
#include "photocal/image.hpp"
#include "photocal/init_calib.hpp"
#include "photocal/texture.hpp"

namespace photocal {

struct PerPixelErrorReport {
  double rms_px = 0.0;
  double max_px = 0.0;
  int stride = 1;
  long long pixel_count = 0;    // pixels that entered the RMS
  long long skipped_count = 0;  // pixels where the true model could not be inverted
};

/// Each sampled pixel (x, y) = (0, stride, ...) is lifted to depth 1 with the
/// true intrinsics and distortion, projected with the estimate, and compared
/// to (x, y). Reports the root of the mean squared distance.
PerPixelErrorReport per_pixel_reprojection_error(const CameraIntrinsics& truth,
                                                 const CameraIntrinsics& estimate,
                                                 ImageSize size, int stride = 8);

struct PoseFit {
  BoardPose pose;
  double rms_px = 0.0;
  int corners = 0;
};

/// Pose of one board view with the intrinsics held fixed: DLT on the
/// undistorted corners, closed-form pose, then corner reprojection LM.
PoseFit fit_pose_fixed_intrinsics(const CameraIntrinsics& intr, const ImageCorners& corners,
                                  const BoardSpec& board);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

struct TestsetImageError {
  int image_id = 0;
  double rms_px = 0.0;
};

struct TestsetReport {
  std::vector<TestsetImageError> images;  // sorted by image id
  MeanStd aggregate;                      // over the per-image RMS values
};

TestsetReport testset_reprojection(const CameraIntrinsics& intr,
                                   std::span<const ImageCorners> testset, const BoardSpec& board);

}  // namespace photocal

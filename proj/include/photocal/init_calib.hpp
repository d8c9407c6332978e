#pragma once

// Closed-form planar calibration from corner correspondences (homographies,
// zero-skew Zhang intrinsics, pose extraction) followed by nonlinear
// refinement of the corner reprojection error.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "photocal/geometry.hpp"
#include "photocal/image.hpp"
#include "photocal/lm.hpp"
#include "photocal/texture.hpp"

namespace photocal {

struct CornerObservation {
  int point_index = 0;
  PixelPoint pixel;
};

/// Detected interest points of one image; each point index at most once.
struct ImageCorners {
  int image_id = 0;
  std::vector<CornerObservation> corners;
};

struct Correspondence {
  Eigen::Vector2d board;
  Eigen::Vector2d pixel;
};

/// Which distortion coefficients are estimated.
enum class DistortionModel { none, k1k2, full };

std::string to_string(DistortionModel m);
DistortionModel distortion_model_from_string(const std::string& name);

/// Free/fixed flags for (fx, fy, x0, y0, k1, k2, p1, p2).
std::array<bool, 8> free_intrinsics(DistortionModel m);

/// Normalized DLT; result has unit Frobenius norm and H(2,2) >= 0.
Eigen::Matrix3d estimate_homography(std::span<const Correspondence> correspondences);

/// Zero-skew closed-form intrinsics from >= 2 board-to-pixel homographies.
/// `size`, when given, conditions the constraint system.
CameraIntrinsics zhang_intrinsics(std::span<const Eigen::Matrix3d> homographies,
                                  std::optional<ImageSize> size = std::nullopt);

/// Extracts [r1 r2 t] from H ~ K [r1 r2 t], re-orthogonalizing R by SVD.
BoardPose pose_from_homography(const CameraIntrinsics& intr, const Eigen::Matrix3d& h);

/// Board-to-pixel homography K [r1 r2 t] of a pose (ignores distortion).
Eigen::Matrix3d pixel_homography(const CameraIntrinsics& intr, const BoardPose& pose);

std::vector<Correspondence> correspondences(const ImageCorners& corners, const BoardSpec& board);

struct CornerCalibration {
  CameraIntrinsics intrinsics;
  std::vector<BoardPose> poses;
  double rms_before = 0.0;  // px, per corner
  double rms_after = 0.0;
  SolveReport report;
};

/// LM on sum ||project(board_point) - corner||^2 over the free intrinsics and
/// all poses. The intrinsics are frozen entirely when `free` is all false.
CornerCalibration refine_corner_reprojection(const CameraIntrinsics& intr,
                                             std::span<const BoardPose> poses,
                                             std::span<const ImageCorners> corners,
                                             const BoardSpec& board,
                                             const std::array<bool, 8>& free,
                                             const LmOptions& options = {});

/// RMS corner reprojection error in pixels.
double corner_rms(const CameraIntrinsics& intr, std::span<const BoardPose> poses,
                  std::span<const ImageCorners> corners, const BoardSpec& board);

/// Homographies -> Zhang -> poses -> corner refinement.
CornerCalibration initial_calibration(std::span<const ImageCorners> corners,
                                      const BoardSpec& board, ImageSize size,
                                      DistortionModel model, const LmOptions& options = {});

}  // namespace photocal

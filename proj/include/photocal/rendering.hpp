#pragma once

// Implicit rendering of board pixels, neighborhood construction around
// interest points, and a synthetic image generator with blur and noise.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "photocal/geometry.hpp"
#include "photocal/image.hpp"
#include "photocal/texture.hpp"

namespace photocal {

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Pixels of image `image_index` over which the local rendering model of
/// interest point `point_index` is used. Pixels are stored in row-major order.
struct PixelNeighborhood {
  int image_index = 0;
  int point_index = 0;
  std::vector<PixelCoord> pixels;
};

inline constexpr double kBackgroundIntensity = 0.5;

/// Rendered intensity at a pixel given the board-space blur (sigma_px / M).
/// `stretch` holds (M_u, M_v) for the neighborhood's interest point.
template <class T>
T render_pixel(const BasicIntrinsics<T>& c, const Mat3<T>& r, const std::array<T, 3>& t,
               const BoardSpec& spec, double px, double py, const T& sigma_px,
               const std::array<T, 2>& stretch) {
  const Vec2<T> uv = pixel_to_board(c, r, t, px, py);
  return texture_blurred(spec, uv[0], uv[1], sigma_px / stretch[0], sigma_px / stretch[1]);
}

/// Renders one pixel, evaluating the stretch factors at interest point j.
double render_pixel(const CameraIntrinsics& intr, const BoardPose& pose, const BoardSpec& spec,
                    PixelPoint px, double sigma_px, int point_index);

/// Neighborhoods for all interest points of `spec`. Points whose
/// neighborhood is empty are skipped and reported in `warnings`.
std::vector<PixelNeighborhood> build_neighborhoods(const CameraIntrinsics& intr,
                                                   const BoardPose& pose, const BoardSpec& spec,
                                                   ImageSize size, int image_index = 0,
                                                   std::vector<std::string>* warnings = nullptr);

/// Same construction for an explicit list of grid points, each given by its
/// board coordinates (which must lie on the spacing grid). Point indices in
/// the output refer to positions in `points`; Manhattan-distance ties go to
/// the lower index.
std::vector<PixelNeighborhood> build_neighborhoods(const CameraIntrinsics& intr,
                                                   const BoardPose& pose,
                                                   std::span<const std::array<double, 2>> points,
                                                   double spacing, ImageSize size,
                                                   int image_index = 0,
                                                   std::vector<std::string>* warnings = nullptr);

/// Full-frame rendering. Board pixels (pattern plus quiet zone) take the blur
/// of their nearest interest point; everything else is background gray.
Image render_board_image(const CameraIntrinsics& intr, const BoardPose& pose,
                         const BoardSpec& spec, ImageSize size,
                         std::span<const double> sigma_per_point);

/// Discrete Gaussian blur (radius ceil(4 sigma), clamped edges) followed by
/// i.i.d. additive Gaussian noise. Output is not clamped.
Image degrade_image(const Image& img, double sigma_blur, double sigma_noise, std::uint64_t seed);

/// Separable Gaussian blur only.
Image gaussian_blur(const Image& img, double sigma);

struct SyntheticConfig {
  ImageSize size{1920, 1080};
  CameraIntrinsics intrinsics{1000.0, 1000.0, 959.5, 539.5, 0, 0, 0, 0};
  BoardSpec board{17, 24, 1.0, TextureKind::checkerboard, 1.0};
  int count = 20;
  double blur_sigma = 0.5;     // px, applied after rendering
  double noise_sigma = 0.01;   // intensity units
  double render_sigma = 0.3;   // px, anti-aliasing of the analytic render
  double intensity_low = 0.1;
  double intensity_high = 0.9;
  double max_tilt_deg = 60.0;
  double max_roll_deg = 180.0;
  double min_span = 0.25;      // fraction of image width covered by the board
  double max_span = 0.8;
  double center_jitter = 0.25; // board center offset, fraction of image size
  int max_attempts = 1000;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on invalid counts, ranges or intrinsics.
void validate(const SyntheticConfig& cfg);

struct SyntheticImage {
  Image image;
  BoardPose pose;
  std::vector<PixelPoint> corners;  // ground truth, indexed by interest point
};

struct SyntheticDataset {
  SyntheticConfig config;
  std::vector<SyntheticImage> images;
};

/// Samples a pose with every interest point inside the frame.
BoardPose sample_board_pose(const SyntheticConfig& cfg, std::uint64_t image_index);

SyntheticImage generate_synthetic_image(const SyntheticConfig& cfg, std::uint64_t image_index);
SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg);

/// Ground-truth interest point pixels: project(board_point(pose, u_j, v_j)).
std::vector<PixelPoint> project_interest_points(const CameraIntrinsics& intr,
                                                const BoardPose& pose, const BoardSpec& spec);

}  // namespace photocal

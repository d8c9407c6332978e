#pragma once

// JSON/CSV file formats: calibration files, synthetic-dataset manifests,
// corner lists and evaluation reports.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "photocal/init_calib.hpp"
#include "photocal/lm.hpp"
#include "photocal/metrics.hpp"
#include "photocal/solver.hpp"
#include "photocal/texture.hpp"

namespace photocal {

using Json = nlohmann::ordered_json;

Json to_json(const CameraIntrinsics& intr);
Json to_json(const BoardSpec& board);
Json to_json(const SolveReport& report);
Json to_json(const PerPixelErrorReport& report);
Json to_json(const TestsetReport& report);

BoardSpec board_from_json(const Json& j);

/// camera_matrix, distortion, poses and sigmas at the top level of `j`.
void write_estimate(Json& j, const CalibrationEstimate& e);
CalibrationEstimate read_estimate(const Json& j);

struct CalibrationFile {
  CalibrationEstimate estimate;                 // refined (or only) estimate
  std::optional<CalibrationEstimate> initial;   // corner-based starting point
  std::optional<BoardSpec> board;
  std::optional<ImageSize> image_size;
  Json solver_report;                           // free-form, may be null
};

void write_calibration(const std::string& path, const CalibrationFile& file);
CalibrationFile read_calibration(const std::string& path);

struct ManifestImage {
  int id = 0;
  std::string path;  // relative to the manifest directory
  BoardPose pose;
  std::vector<PixelPoint> corners;
};

struct Manifest {
  ImageSize image_size;
  BoardSpec board;
  CameraIntrinsics intrinsics;
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;
  double render_sigma = 0.0;
  double intensity_low = 0.1;
  double intensity_high = 0.9;
  double corner_noise = 0.0;
  unsigned long long seed = 0;
  std::string corners_csv;
  std::vector<ManifestImage> images;
};

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

/// Ground truth of a manifest as an estimate (sigmas left empty).
CalibrationEstimate manifest_estimate(const Manifest& m);

/// Columns: image_id,point_index,board_u,board_v,pixel_x,pixel_y
void write_corners_csv(const std::string& path, const std::vector<ImageCorners>& corners,
                       const BoardSpec& board);
/// Rows may appear in any order; output is grouped per image, sorted by id.
std::vector<ImageCorners> read_corners_csv(const std::string& path);

void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace photocal

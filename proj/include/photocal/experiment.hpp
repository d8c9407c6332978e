#pragma once

// Seeded synthetic trials comparing the corner-based initialization with the
// photometric refinement, shared by the compare command and the test suites.

#include <cstdint>
#include <string>
#include <vector>

#include "photocal/init_calib.hpp"
#include "photocal/metrics.hpp"
#include "photocal/rendering.hpp"
#include "photocal/solver.hpp"

namespace photocal {

struct TrialSetup {
  SyntheticConfig scene;           // count, blur, noise, seed are set per trial
  double corner_noise = 0.3;       // px, added to the ground-truth corners
  DistortionModel init_model = DistortionModel::none;
  DistortionModel refine_model = DistortionModel::none;
  SolverOptions solver;
  int stride = 8;                  // per-pixel error sampling
};

/// Desk-scale scene: 640x480, f = 600, 10x7 interest points.
TrialSetup desk_trial_setup();

struct TrialResult {
  int n = 0;
  double sigma = 0.0;
  double sigma_n = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;      // stage-prefixed message when !ok
  double init_rms = 0.0;  // per-pixel error of the corner-based calibration
  double ours_rms = 0.0;  // per-pixel error after photometric refinement
  SolveReport report;
  CalibrationEstimate initial;
  CalibrationEstimate refined;
};

/// Seed of trial `trial` in grid cell `cell`, derived from the sweep seed.
std::uint64_t trial_seed(std::uint64_t sweep_seed, int cell, int trial);

/// Generates n images, perturbs their corners, initializes from corners and
/// refines photometrically. Failures are captured in the result.
TrialResult run_trial(const TrialSetup& setup, int n, double sigma, double sigma_n, int trial,
                      std::uint64_t seed);

/// Ground-truth corners of a synthetic image with Gaussian pixel noise.
ImageCorners noisy_corners(const SyntheticImage& img, int image_id, double noise_px,
                           std::uint64_t seed);

}  // namespace photocal

#include "photocal/experiment.hpp"

#include <random>

#include "photocal/errors.hpp"
#include "photocal/random.hpp"

namespace photocal {

TrialSetup desk_trial_setup() {
  TrialSetup s;
  s.scene.size = {640, 480};
  s.scene.intrinsics = {600.0, 600.0, 319.5, 239.5, 0, 0, 0, 0};
  s.scene.board = {7, 10, 1.0, TextureKind::checkerboard, 1.0};
  return s;
}

std::uint64_t trial_seed(std::uint64_t sweep_seed, int cell, int trial) {
  auto rng = make_stream(sweep_seed, Stream::trial_sampling,
                         (static_cast<std::uint64_t>(cell) << 32) | static_cast<std::uint32_t>(trial));
  return rng();
}

ImageCorners noisy_corners(const SyntheticImage& img, int image_id, double noise_px,
                           std::uint64_t seed) {
  ImageCorners out;
  out.image_id = image_id;
  auto rng = make_stream(seed, Stream::corner_noise, static_cast<std::uint64_t>(image_id));
  std::normal_distribution<double> noise(0.0, noise_px);
  for (std::size_t j = 0; j < img.corners.size(); ++j) {
    PixelPoint p = img.corners[j];
    if (noise_px > 0.0) {
      p.x += noise(rng);
      p.y += noise(rng);
    }
    out.corners.push_back({static_cast<int>(j), p});
  }
  return out;
}

TrialResult run_trial(const TrialSetup& setup, int n, double sigma, double sigma_n, int trial,
                      std::uint64_t seed) {
  TrialResult r;
  r.n = n;
  r.sigma = sigma;
  r.sigma_n = sigma_n;
  r.trial = trial;
  r.seed = seed;
  SyntheticConfig cfg = setup.scene;
  cfg.count = n;
  cfg.blur_sigma = sigma;
  cfg.noise_sigma = sigma_n;
  cfg.seed = seed;
  std::vector<Image> images;
  std::vector<ImageCorners> corners;
  try {
    const SyntheticDataset ds = generate_synthetic_dataset(cfg);
    for (int i = 0; i < n; ++i) {
      images.push_back(ds.images[i].image);
      corners.push_back(noisy_corners(ds.images[i], i, setup.corner_noise, seed));
    }
  } catch (const std::exception& e) {
    r.error = std::string("synthesis: ") + e.what();
    return r;
  }
  CalibrateOptions opts;
  opts.init_model = setup.init_model;
  opts.refine_model = setup.refine_model;
  opts.solver = setup.solver;
  try {
    const CalibrationResult res = calibrate(images, &corners, nullptr, cfg.board, opts);
    r.initial = res.initial;
    r.refined = res.refined;
    r.report = res.report;
    r.init_rms = per_pixel_reprojection_error(cfg.intrinsics, res.initial.intrinsics, cfg.size,
                                              setup.stride).rms_px;
    r.ours_rms = per_pixel_reprojection_error(cfg.intrinsics, res.refined.intrinsics, cfg.size,
                                              setup.stride).rms_px;
    r.ok = true;
  } catch (const EstimationError& e) {
    r.error = e.what();
  } catch (const SolverError& e) {
    r.error = e.what();
  } catch (const std::exception& e) {
    r.error = std::string("evaluation: ") + e.what();
  }
  return r;
}

}  // namespace photocal

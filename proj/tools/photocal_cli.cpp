#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "photocal/errors.hpp"
#include "photocal/experiment.hpp"
#include "photocal/image.hpp"
#include "photocal/io.hpp"
#include "photocal/metrics.hpp"
#include "photocal/parallel.hpp"
#include "photocal/rendering.hpp"
#include "photocal/solver.hpp"

namespace fs = std::filesystem;
using namespace photocal;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kInit = 4, kSolver = 5 };

struct BoardArgs {
  int rows = 7;
  int cols = 10;
  double spacing = 1.0;
  double margin = 1.0;
  BoardSpec spec() const { return {rows, cols, spacing, TextureKind::checkerboard, margin}; }
};

void add_board_options(CLI::App* app, BoardArgs& b) {
  app->add_option("--board-rows", b.rows, "Interest-point rows")->capture_default_str();
  app->add_option("--board-cols", b.cols, "Interest-point columns")->capture_default_str();
  app->add_option("--spacing", b.spacing, "Grid pitch in board units")->capture_default_str();
  app->add_option("--margin", b.margin, "Quiet zone width in board units")->capture_default_str();
}

// ---- gen-synthetic

struct GenArgs {
  std::string output = "synthetic";
  int count = 20;
  int width = 1920;
  int height = 1080;
  double focal = 1000.0;
  double blur = 0.5;
  double noise = 0.01;
  double corner_noise = 0.0;
  double max_tilt = 60.0;
  double render_sigma = 0.3;
  double intensity_low = 0.1;
  double intensity_high = 0.9;
  int bit_depth = 16;
  BoardArgs board{17, 24, 1.0, 1.0};
};

int cmd_gen_synthetic(const GenArgs& a, std::uint64_t seed, int threads) {
  SyntheticConfig cfg;
  cfg.size = {a.width, a.height};
  cfg.intrinsics = {a.focal, a.focal, (a.width - 1) / 2.0, (a.height - 1) / 2.0, 0, 0, 0, 0};
  cfg.board = a.board.spec();
  cfg.count = a.count;
  cfg.blur_sigma = a.blur;
  cfg.noise_sigma = a.noise;
  cfg.max_tilt_deg = a.max_tilt;
  cfg.render_sigma = a.render_sigma;
  cfg.intensity_low = a.intensity_low;
  cfg.intensity_high = a.intensity_high;
  cfg.seed = seed;
  validate(cfg);
  if (a.corner_noise < 0.0) throw ConfigError("--corner-noise must be >= 0");
  if (a.bit_depth != 8 && a.bit_depth != 16) throw ConfigError("--bit-depth must be 8 or 16");

  std::vector<SyntheticImage> images(cfg.count);
  parallel_for(cfg.count, threads, [&](int i) {
    images[i] = generate_synthetic_image(cfg, static_cast<std::uint64_t>(i));
  });

  fs::create_directories(fs::path(a.output) / "images");
  Manifest m;
  m.image_size = cfg.size;
  m.board = cfg.board;
  m.intrinsics = cfg.intrinsics;
  m.blur_sigma = cfg.blur_sigma;
  m.noise_sigma = cfg.noise_sigma;
  m.render_sigma = cfg.render_sigma;
  m.intensity_low = cfg.intensity_low;
  m.intensity_high = cfg.intensity_high;
  m.corner_noise = a.corner_noise;
  m.seed = seed;
  m.corners_csv = "corners.csv";
  std::vector<ImageCorners> corners;
  for (int i = 0; i < cfg.count; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "images/image_%04d.png", i);
    write_image((fs::path(a.output) / name).string(), images[i].image, a.bit_depth);
    m.images.push_back({i, name, images[i].pose, images[i].corners});
    corners.push_back(noisy_corners(images[i], i, a.corner_noise, seed));
  }
  write_corners_csv((fs::path(a.output) / m.corners_csv).string(), corners, cfg.board);
  write_manifest((fs::path(a.output) / "manifest.json").string(), m);
  std::cout << "wrote " << cfg.count << " images to " << a.output << "\n";
  return kOk;
}

// ---- calibrate

struct CalibrateArgs {
  std::vector<std::string> images;
  std::string manifest;
  std::string corners;
  std::string init;
  std::string output = "calibration.json";
  std::string init_model = "none";
  std::string model = "none";
  int max_iterations = 100;
  double initial_sigma = 1.0;
  bool no_schur = false;
  BoardArgs board;
  bool board_given = false;
};

std::vector<Image> load_images(const std::vector<std::string>& paths) {
  std::vector<Image> out;
  for (const auto& p : paths) out.push_back(read_image(p));
  for (const auto& img : out) {
    if (img.width != out[0].width || img.height != out[0].height) {
      throw ConfigError("all images must have the same size");
    }
  }
  return out;
}

int cmd_calibrate(const CalibrateArgs& a, int threads) {
  std::vector<std::string> paths = a.images;
  std::string corners_path = a.corners;
  std::optional<BoardSpec> board;
  if (!a.manifest.empty()) {
    const Manifest m = read_manifest(a.manifest);
    const fs::path dir = fs::path(a.manifest).parent_path();
    if (paths.empty()) {
      for (const auto& im : m.images) paths.push_back((dir / im.path).string());
    }
    if (corners_path.empty() && a.init.empty() && !m.corners_csv.empty()) {
      corners_path = (dir / m.corners_csv).string();
    }
    board = m.board;
  }
  std::optional<CalibrationFile> init_file;
  if (!a.init.empty()) {
    init_file = read_calibration(a.init);
    if (!board && init_file->board) board = init_file->board;
  }
  if (a.board_given || !board) board = a.board.spec();
  validate(*board);
  if (paths.empty()) throw ConfigError("no images given (use --images or --manifest)");
  if (corners_path.empty() && !init_file) throw ConfigError("either --corners or --init is required");
  if (a.max_iterations < 0) throw ConfigError("--max-iterations must be >= 0");
  if (!(a.initial_sigma > kSigmaMin)) throw ConfigError("--initial-sigma must exceed the blur floor");

  const std::vector<Image> images = load_images(paths);
  CalibrateOptions opts;
  opts.init_model = distortion_model_from_string(a.init_model);
  opts.refine_model = distortion_model_from_string(a.model);
  opts.solver.lm.max_iterations = a.max_iterations;
  opts.solver.use_schur = !a.no_schur;
  opts.solver.threads = threads;
  opts.initial_sigma = a.initial_sigma;

  std::vector<ImageCorners> corners;
  CalibrationResult res;
  if (init_file) {
    CalibrationEstimate init = init_file->estimate;
    if (init.sigmas.size() != images.size() ||
        (!init.sigmas.empty() && static_cast<int>(init.sigmas[0].size()) != board->num_points())) {
      init.sigmas.clear();
    }
    res = calibrate(images, nullptr, &init, *board, opts);
  } else {
    corners = read_corners_csv(corners_path);
    res = calibrate(images, &corners, nullptr, *board, opts);
  }

  CalibrationFile out;
  out.estimate = res.refined;
  out.initial = res.initial;
  out.board = *board;
  out.image_size = ImageSize{images[0].width, images[0].height};
  out.solver_report = to_json(res.report);
  out.solver_report["num_neighborhoods"] = res.num_neighborhoods;
  out.solver_report["num_residuals"] = res.num_residuals;
  out.solver_report["initial_corner_rms_px"] = res.initial_corner_rms;
  out.solver_report["warnings"] = res.warnings;
  write_calibration(a.output, out);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "cost " << format_double(res.report.initial_cost) << " -> "
            << format_double(res.report.final_cost) << " after " << res.report.iterations
            << " iterations (" << to_string(res.report.termination) << ")\n";
  return kOk;
}

// ---- evaluate

struct EvaluateArgs {
  std::string calibration;
  std::string manifest;
  std::string corners;
  std::string mode = "per-pixel";
  std::string output = "report.json";
  int stride = 8;
  BoardArgs board;
  bool board_given = false;
};

std::string csv_path_for(const std::string& json_path) {
  fs::path p(json_path);
  p.replace_extension(".csv");
  return p.string();
}

int cmd_evaluate(const EvaluateArgs& a) {
  const CalibrationFile cal = read_calibration(a.calibration);
  Json report;
  std::string csv;
  if (a.mode == "per-pixel") {
    if (a.manifest.empty()) throw ConfigError("per-pixel mode needs --manifest with ground truth");
    const Manifest m = read_manifest(a.manifest);
    const PerPixelErrorReport r =
        per_pixel_reprojection_error(m.intrinsics, cal.estimate.intrinsics, m.image_size, a.stride);
    report["mode"] = "per-pixel";
    report["per_pixel"] = to_json(r);
    if (cal.initial) {
      const PerPixelErrorReport ri =
          per_pixel_reprojection_error(m.intrinsics, cal.initial->intrinsics, m.image_size, a.stride);
      report["initial_per_pixel"] = to_json(ri);
    }
    csv = "estimate,rms_px,max_px,stride,pixel_count,skipped_count\n";
    auto row = [&](const char* name, const PerPixelErrorReport& x) {
      csv += std::string(name) + ',' + format_double(x.rms_px) + ',' + format_double(x.max_px) +
             ',' + std::to_string(x.stride) + ',' + std::to_string(x.pixel_count) + ',' +
             std::to_string(x.skipped_count) + '\n';
    };
    row("refined", r);
    if (cal.initial) {
      row("initial", per_pixel_reprojection_error(m.intrinsics, cal.initial->intrinsics,
                                                  m.image_size, a.stride));
    }
  } else if (a.mode == "testset") {
    std::string corners_path = a.corners;
    std::optional<BoardSpec> board = cal.board;
    if (!a.manifest.empty()) {
      const Manifest m = read_manifest(a.manifest);
      if (corners_path.empty()) corners_path = (fs::path(a.manifest).parent_path() / m.corners_csv).string();
      board = m.board;
    }
    if (a.board_given || !board) board = a.board.spec();
    if (corners_path.empty()) throw ConfigError("testset mode needs --corners or --manifest");
    const auto test = read_corners_csv(corners_path);
    const TestsetReport r = testset_reprojection(cal.estimate.intrinsics, test, *board);
    report["mode"] = "testset";
    report["testset"] = to_json(r);
    csv = "image_id,rms_px\n";
    for (const auto& i : r.images) csv += std::to_string(i.image_id) + ',' + format_double(i.rms_px) + '\n';
    csv += "mean," + format_double(r.aggregate.mean) + "\nstd," + format_double(r.aggregate.std) + '\n';
  } else {
    throw ConfigError("unknown --mode '" + a.mode + "' (per-pixel or testset)");
  }
  write_json(a.output, report);
  write_text(csv_path_for(a.output), csv);
  std::cout << report.dump(2) << "\n";
  return kOk;
}

// ---- compare

struct CompareArgs {
  std::vector<int> n{3};
  std::vector<double> sigma{0.5};
  std::vector<double> sigma_n{0.0, 0.015};
  int trials = 3;
  int width = 640;
  int height = 480;
  double focal = 600.0;
  double corner_noise = 0.3;
  int stride = 8;
  int max_iterations = 100;
  std::string model = "none";
  std::string output = "compare.csv";
  BoardArgs board;
};

int cmd_compare(const CompareArgs& a, std::uint64_t seed, int threads) {
  if (a.trials < 1) throw ConfigError("--trials must be >= 1");
  for (int n : a.n) {
    if (n < 1) throw ConfigError("--n values must be >= 1");
  }
  TrialSetup setup = desk_trial_setup();
  setup.scene.size = {a.width, a.height};
  setup.scene.intrinsics = {a.focal, a.focal, (a.width - 1) / 2.0, (a.height - 1) / 2.0, 0, 0, 0, 0};
  setup.scene.board = a.board.spec();
  setup.corner_noise = a.corner_noise;
  setup.stride = a.stride;
  setup.init_model = setup.refine_model = distortion_model_from_string(a.model);
  setup.solver.lm.max_iterations = a.max_iterations;
  {
    SyntheticConfig probe = setup.scene;
    probe.count = 1;
    validate(probe);
  }

  struct Job {
    int cell, n, trial;
    double sigma, sigma_n;
  };
  std::vector<Job> jobs;
  int cell = 0;
  for (int n : a.n) {
    for (double s : a.sigma) {
      for (double sn : a.sigma_n) {
        for (int t = 0; t < a.trials; ++t) jobs.push_back({cell, n, t, s, sn});
        ++cell;
      }
    }
  }
  std::vector<TrialResult> results(jobs.size());
  // Trials run in parallel, each with a single-threaded solver.
  parallel_for(static_cast<int>(jobs.size()), threads, [&](int k) {
    const Job& j = jobs[k];
    results[k] = run_trial(setup, j.n, j.sigma, j.sigma_n, j.trial, trial_seed(seed, j.cell, j.trial));
  });

  std::string csv = "n,sigma,sigma_n,trial,seed,method,rms_px,std,status\n";
  int failures = 0;
  for (std::size_t begin = 0; begin < jobs.size(); begin += a.trials) {
    std::vector<double> init, ours;
    for (int t = 0; t < a.trials; ++t) {
      const TrialResult& r = results[begin + t];
      if (r.ok) {
        init.push_back(r.init_rms);
        ours.push_back(r.ours_rms);
      }
    }
    const MeanStd si = mean_std(init);
    const MeanStd so = mean_std(ours);
    for (int t = 0; t < a.trials; ++t) {
      const TrialResult& r = results[begin + t];
      std::string status = r.ok ? "ok" : r.error;
      for (char& c : status) {
        if (c == ',' || c == '\n') c = ';';
      }
      if (!r.ok) ++failures;
      const std::string prefix = std::to_string(r.n) + ',' + format_double(r.sigma) + ',' +
                                 format_double(r.sigma_n) + ',' + std::to_string(r.trial) + ',' +
                                 std::to_string(r.seed) + ',';
      csv += prefix + "init," + (r.ok ? format_double(r.init_rms) : "nan") + ',' +
             format_double(si.std) + ',' + status + '\n';
      csv += prefix + "ours," + (r.ok ? format_double(r.ours_rms) : "nan") + ',' +
             format_double(so.std) + ',' + status + '\n';
    }
    std::cout << "n=" << results[begin].n << " sigma=" << results[begin].sigma
              << " sigma_n=" << results[begin].sigma_n << ": init " << si.mean << " +- " << si.std
              << ", ours " << so.mean << " +- " << so.std << " px\n";
  }
  write_text(a.output, csv);
  if (failures) std::cerr << failures << " trial(s) failed; see the status column\n";
  return kOk;
}

// ---- debug-render

struct DebugArgs {
  std::string calibration;
  std::string image;
  int image_id = 0;
  std::string output = "debug";
  double gain = 1.0;
  BoardArgs board;
  bool board_given = false;
};

int cmd_debug_render(const DebugArgs& a) {
  const CalibrationFile cal = read_calibration(a.calibration);
  std::optional<BoardSpec> board = cal.board;
  if (a.board_given || !board) board = a.board.spec();
  validate(*board);
  const Image img = read_image(a.image);
  if (a.image_id < 0 || a.image_id >= static_cast<int>(cal.estimate.poses.size())) {
    throw ConfigError("--image-id " + std::to_string(a.image_id) + " has no pose in the calibration");
  }
  std::vector<double> sigmas(board->num_points(), 1.0);
  if (a.image_id < static_cast<int>(cal.estimate.sigmas.size()) &&
      static_cast<int>(cal.estimate.sigmas[a.image_id].size()) == board->num_points()) {
    sigmas = cal.estimate.sigmas[a.image_id];
  }
  const Image rendered = render_board_image(cal.estimate.intrinsics, cal.estimate.poses[a.image_id],
                                            *board, {img.width, img.height}, sigmas);
  RgbImage diff{img.width, img.height, std::vector<std::uint8_t>(3 * img.pixels.size(), 0)};
  for (std::size_t k = 0; k < img.pixels.size(); ++k) {
    const double d = a.gain * (img.pixels[k] - rendered.pixels[k]);
    const auto level = static_cast<std::uint8_t>(std::lround(std::min(1.0, std::abs(d)) * 255.0));
    if (d > 0) diff.rgb[3 * k] = level;
    if (d < 0) diff.rgb[3 * k + 2] = level;
  }
  fs::create_directories(a.output);
  write_image((fs::path(a.output) / "rendered.png").string(), rendered, 16);
  write_png((fs::path(a.output) / "difference.png").string(), diff);
  std::cout << "wrote " << (fs::path(a.output) / "rendered.png").string() << " and difference.png\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"photocal: camera calibration by rendering a blurred board model"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  int threads = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  };

  GenArgs gen;
  auto* g = app.add_subcommand("gen-synthetic", "Render a synthetic calibration dataset");
  add_common(g);
  g->add_option("--output", gen.output, "Output directory")->capture_default_str();
  g->add_option("--count", gen.count, "Number of images")->capture_default_str();
  g->add_option("--width", gen.width)->capture_default_str();
  g->add_option("--height", gen.height)->capture_default_str();
  g->add_option("--focal", gen.focal, "Focal length in pixels")->capture_default_str();
  g->add_option("--blur", gen.blur, "Gaussian blur sigma in pixels")->capture_default_str();
  g->add_option("--noise", gen.noise, "Additive noise sigma (intensity units)")->capture_default_str();
  g->add_option("--corner-noise", gen.corner_noise, "Noise added to the corner CSV (px)")->capture_default_str();
  g->add_option("--max-tilt", gen.max_tilt, "Maximum board tilt in degrees")->capture_default_str();
  g->add_option("--render-sigma", gen.render_sigma, "Anti-aliasing blur of the analytic render (px)")->capture_default_str();
  g->add_option("--intensity-low", gen.intensity_low, "Intensity of black squares")->capture_default_str();
  g->add_option("--intensity-high", gen.intensity_high, "Intensity of white squares")->capture_default_str();
  g->add_option("--bit-depth", gen.bit_depth, "PNG bit depth (8 or 16)")->capture_default_str();
  add_board_options(g, gen.board);

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Corner initialization followed by photometric refinement");
  add_common(c);
  c->add_option("--images", cal.images, "Input images (PNG/PGM)");
  c->add_option("--manifest", cal.manifest, "Synthetic manifest supplying images, corners and board");
  c->add_option("--corners", cal.corners, "Corner CSV (image_id refers to the image order)");
  c->add_option("--init", cal.init, "Initial calibration JSON instead of corners");
  c->add_option("--output", cal.output, "Calibration JSON")->capture_default_str();
  c->add_option("--init-model", cal.init_model, "Distortion model for the corner stage (none, k1k2, full)")->capture_default_str();
  c->add_option("--model", cal.model, "Distortion model for the refinement (none, k1k2, full)")->capture_default_str();
  c->add_option("--max-iterations", cal.max_iterations)->capture_default_str();
  c->add_option("--initial-sigma", cal.initial_sigma, "Starting blur in pixels")->capture_default_str();
  c->add_flag("--no-schur", cal.no_schur, "Solve the full normal equations densely");
  add_board_options(c, cal.board);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Per-pixel or test-set reprojection error");
  add_common(e);
  e->add_option("--calibration", ev.calibration)->required();
  e->add_option("--manifest", ev.manifest, "Ground-truth manifest");
  e->add_option("--corners", ev.corners, "Test corner CSV");
  e->add_option("--mode", ev.mode, "per-pixel or testset")->capture_default_str();
  e->add_option("--stride", ev.stride)->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("--output", ev.output, "Report JSON; a CSV is written next to it")->capture_default_str();
  add_board_options(e, ev.board);

  CompareArgs cmp;
  auto* m = app.add_subcommand("compare", "Sweep over image count, blur and noise");
  add_common(m);
  m->add_option("--n", cmp.n, "Images per trial")->capture_default_str();
  m->add_option("--sigma", cmp.sigma, "Blur levels (px)")->capture_default_str();
  m->add_option("--sigma-n", cmp.sigma_n, "Noise levels (intensity units)")->capture_default_str();
  m->add_option("--trials", cmp.trials)->capture_default_str();
  m->add_option("--width", cmp.width)->capture_default_str();
  m->add_option("--height", cmp.height)->capture_default_str();
  m->add_option("--focal", cmp.focal)->capture_default_str();
  m->add_option("--corner-noise", cmp.corner_noise, "Corner noise for the initialization (px)")->capture_default_str();
  m->add_option("--stride", cmp.stride)->check(CLI::PositiveNumber)->capture_default_str();
  m->add_option("--max-iterations", cmp.max_iterations)->capture_default_str();
  m->add_option("--model", cmp.model)->capture_default_str();
  m->add_option("--output", cmp.output, "Sweep CSV")->capture_default_str();
  add_board_options(m, cmp.board);

  DebugArgs dbg;
  auto* d = app.add_subcommand("debug-render", "Render the board and a signed difference image");
  add_common(d);
  d->add_option("--calibration", dbg.calibration)->required();
  d->add_option("--image", dbg.image)->required();
  d->add_option("--image-id", dbg.image_id, "Pose index in the calibration")->capture_default_str();
  d->add_option("--gain", dbg.gain, "Difference amplification")->capture_default_str();
  d->add_option("--output", dbg.output, "Output directory")->capture_default_str();
  add_board_options(d, dbg.board);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfig;
  }

  auto board_given = [](CLI::App* sub) {
    for (const char* name : {"--board-rows", "--board-cols", "--spacing", "--margin"}) {
      if (sub->count(name)) return true;
    }
    return false;
  };

  try {
    if (g->parsed()) return cmd_gen_synthetic(gen, seed, threads);
    if (c->parsed()) {
      cal.board_given = board_given(c);
      return cmd_calibrate(cal, threads);
    }
    if (e->parsed()) {
      ev.board_given = board_given(e);
      return cmd_evaluate(ev);
    }
    if (m->parsed()) return cmd_compare(cmp, seed, threads);
    if (d->parsed()) {
      dbg.board_given = board_given(d);
      return cmd_debug_render(dbg);
    }
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kConfig;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "i/o error: " << err.what() << "\n";
    return kIo;
  } catch (const EstimationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kInit;
  } catch (const SolverError& err) {
    std::cerr << "error: refinement: " << err.what() << "\n";
    return kSolver;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kSolver;
  }
  return kConfig;
}

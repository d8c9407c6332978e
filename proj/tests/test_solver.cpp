#include <gtest/gtest.h>

#include <numeric>

#include "photocal/solver.hpp"
#include "jacobian_check.hpp"
#include "scenes.hpp"
#include "test_util.hpp"

using namespace photocal;
using photocal::testing::check_jacobian_rows;
using photocal::testing::FdCheck;
using photocal::testing::make_scene;
using photocal::testing::perturbed;
using photocal::testing::self_consistent;
using photocal::testing::tiny_config;
using photocal::testing::uniform;

TEST(Pack, LayoutAndRoundTrips) {
  const auto s = make_scene(tiny_config(2, 1));
  const Eigen::VectorXd v = pack(s.truth);
  const ParameterLayout L{2, 20};
  EXPECT_EQ(v.size(), 8 + 7 * 2 + 2 * 20);
  EXPECT_EQ(L.size(), v.size());
  const CalibrationEstimate e = unpack(L, v);
  EXPECT_EQ(e.intrinsics.fx, s.truth.intrinsics.fx);
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(e.poses[i].q[k], s.truth.poses[i].q[k], 1e-15);
    for (int j = 0; j < 20; ++j) EXPECT_NEAR(e.sigmas[i][j], s.truth.sigmas[i][j], 1e-15);
  }
  // Random vectors survive pack(unpack(.)) up to the quaternion scale.
  auto g = photocal::testing::rng(50);
  Eigen::VectorXd r(L.size());
  for (int k = 0; k < r.size(); ++k) r[k] = uniform(g, 0.1, 2.0);
  const Eigen::VectorXd back = pack(unpack(L, r));
  for (int k = 0; k < r.size(); ++k) {
    bool quat = false;
    for (int i = 0; i < 2; ++i) quat |= (k >= L.pose_offset(i) && k < L.pose_offset(i) + 4);
    if (!quat) EXPECT_NEAR(back[k], r[k], 1e-12 * std::max(1.0, std::abs(r[k])));
  }
  for (int i = 0; i < 2; ++i) {
    const Eigen::Vector4d a = r.segment<4>(L.pose_offset(i)).normalized();
    const Eigen::Vector4d b = back.segment<4>(L.pose_offset(i));
    EXPECT_LT(std::min((a - b).norm(), (a + b).norm()), 1e-12);
  }
  EXPECT_THROW(unpack(L, Eigen::VectorXd::Zero(5)), ConfigError);
}

TEST(Pack, UnitSigmaStoresZeroAndFloorHolds) {
  EXPECT_EQ(parameter_from_sigma(1.0), 0.0);
  EXPECT_EQ(sigma_from_parameter(0.0), 1.0);
  EXPECT_GE(sigma_from_parameter(-50.0), kSigmaMin);
  EXPECT_GT(sigma_from_parameter(-10.0), kSigmaMin);
  EXPECT_NEAR(sigma_from_parameter(parameter_from_sigma(0.37)), 0.37, 1e-15);
}

TEST(Residuals, CountOrderAndSelfConsistency) {
  const auto s = make_scene(self_consistent(tiny_config(2, 2)));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  PhotometricProblem p(obs, {});
  std::size_t total = 0;
  for (std::size_t k = 0; k < obs.neighborhoods.size(); ++k) {
    total += obs.neighborhoods[k].pixels.size();
    if (k) {
      const auto& a = obs.neighborhoods[k - 1];
      const auto& b = obs.neighborhoods[k];
      EXPECT_TRUE(a.image_index < b.image_index || (a.image_index == b.image_index && a.point_index < b.point_index));
    }
  }
  EXPECT_EQ(static_cast<std::size_t>(p.num_residuals()), total);
  const Eigen::VectorXd r = p.residuals(pack(s.truth));
  EXPECT_EQ(static_cast<std::size_t>(r.size()), total);
  EXPECT_LT(r.lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Residuals, FocalPerturbationIncreasesCost) {
  const auto s = make_scene(tiny_config(2, 3));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  PhotometricProblem p(obs, {});
  Eigen::VectorXd v = pack(s.truth);
  const double c0 = p.cost(v);
  v[0] *= 1.01;
  EXPECT_GT(p.cost(v), c0);
}

TEST(Residuals, ThreadCountDoesNotChangeResults) {
  const auto s = make_scene(tiny_config(3, 4));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  SolverOptions one, many;
  many.threads = 3;
  PhotometricProblem a(obs, one), b(obs, many);
  const Eigen::VectorXd v = perturbed(pack(s.truth), a.layout(), 5);
  EXPECT_EQ(a.residuals(v), b.residuals(v));
  EXPECT_EQ(a.linearize(v), b.linearize(v));
  EXPECT_EQ(a.gradient(), b.gradient());
}

TEST(Jacobian, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {6u, 7u}) {
    const auto s = make_scene(tiny_config(2, seed));
    const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
    PhotometricProblem p(obs, {});
    const Eigen::VectorXd v = perturbed(pack(s.truth), p.layout(), seed);
    const FdCheck c = check_jacobian_rows(p, obs, v, 200, seed);
    EXPECT_LT(c.worst, 1e-5);
    EXPECT_EQ(c.column_mismatches, 0);
  }
}

TEST(Jacobian, BlockSparsity) {
  const auto s = make_scene(tiny_config(2, 8));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  PhotometricProblem p(obs, {});
  const ParameterLayout& L = p.layout();
  const Eigen::MatrixXd j = p.jacobian(perturbed(pack(s.truth), L, 8)).to_dense();
  int row = 0;
  for (const auto& nb : obs.neighborhoods) {
    for (std::size_t q = 0; q < nb.pixels.size(); ++q, ++row) {
      for (int i = 0; i < L.num_images; ++i) {
        if (i == nb.image_index) continue;
        EXPECT_EQ(j.row(row).segment(L.pose_offset(i), 7).cwiseAbs().maxCoeff(), 0.0);
      }
      for (int i = 0; i < L.num_images; ++i)
        for (int k = 0; k < L.num_points; ++k) {
          if (i == nb.image_index && k == nb.point_index) continue;
          EXPECT_EQ(j(row, L.sigma_offset(i, k)), 0.0);
        }
      EXPECT_LE((j.row(row).array() != 0).count(), 16);
    }
  }
}

TEST(Solver, FailedPixelsHoldLastValueWithZeroDerivative) {
  const auto s = make_scene(tiny_config(2, 9));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  PhotometricProblem p(obs, {});
  const ParameterLayout& L = p.layout();
  Eigen::VectorXd v = pack(s.truth);
  const Eigen::VectorXd good = p.residuals(v);
  p.linearize(v);
  Eigen::VectorXd bad = v;
  bad[L.pose_offset(0) + 6] = -bad[L.pose_offset(0) + 6];  // board behind the camera
  const Eigen::VectorXd held = p.residuals(bad);
  const SparseJacobian jac = p.jacobian(bad);
  int row = 0;
  for (const auto& nb : obs.neighborhoods) {
    for (std::size_t q = 0; q < nb.pixels.size(); ++q, ++row) {
      if (nb.image_index != 0) continue;
      EXPECT_NEAR(held[row], good[row], 1e-12);  // held values come from the dual pass
      for (double d : jac.values[row]) EXPECT_EQ(d, 0.0);
    }
  }
  p.cost(bad);
  EXPECT_GT(p.failed_evaluations(), 0);
}

TEST(Solver, SchurMatchesDenseNormalEquations) {
  const auto s = make_scene(tiny_config(2, 10));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  SolverOptions schur, dense;
  dense.use_schur = false;
  PhotometricProblem a(obs, schur), b(obs, dense);
  const Eigen::VectorXd v = perturbed(pack(s.truth), a.layout(), 10);
  a.linearize(v);
  b.linearize(v);
  Eigen::VectorXd da, db;
  ASSERT_TRUE(a.solve_damped(1e-3, da));
  ASSERT_TRUE(b.solve_damped(1e-3, db));
  EXPECT_LT((da - db).norm(), 1e-8 * std::max(1.0, db.norm()));

  CalibrationEstimate start = unpack(a.layout(), v);
  start.intrinsics.k1 = start.intrinsics.k2 = start.intrinsics.p1 = start.intrinsics.p2 = 0;
  SolveReport ra, rb;
  schur.free_intrinsics = dense.free_intrinsics = free_intrinsics(DistortionModel::none);
  refine_photometric(obs, start, schur, ra);
  refine_photometric(obs, start, dense, rb);
  EXPECT_LT(std::abs(ra.final_cost - rb.final_cost), 1e-10 * std::max(1.0, rb.final_cost));
}

TEST(Solver, NeighborhoodOrderDoesNotChangeFinalCost) {
  const auto s = make_scene(tiny_config(2, 11));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  SolverOptions opts;
  opts.free_intrinsics = free_intrinsics(DistortionModel::none);
  PhotometricProblem a(obs, opts), b(obs, opts);
  std::vector<int> order(obs.neighborhoods.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), photocal::testing::rng(51));
  b.set_neighborhood_order(order);
  CalibrationEstimate start = s.truth;
  start.intrinsics.fx *= 1.005;
  for (auto& row : start.sigmas) std::fill(row.begin(), row.end(), 1.0);
  const Eigen::VectorXd v0 = pack(start);
  SolveReport ra, rb;
  levenberg_marquardt(a, v0, opts.lm, ra);
  levenberg_marquardt(b, v0, opts.lm, rb);
  EXPECT_LT(std::abs(ra.final_cost - rb.final_cost), 1e-12 * std::max(1.0, ra.final_cost));
  EXPECT_THROW(b.set_neighborhood_order({0, 0}), ConfigError);
}

TEST(Solver, CostTraceNeverIncreases) {
  const auto s = make_scene(tiny_config(3, 12));
  CalibrationEstimate start = s.truth;
  start.intrinsics.fx *= 1.01;
  start.intrinsics.y0 += 1.5;
  for (auto& row : start.sigmas) std::fill(row.begin(), row.end(), 1.0);
  const ObservationSet obs = make_observations(s.images, s.config.board, start);
  SolverOptions opts;
  opts.free_intrinsics = free_intrinsics(DistortionModel::k1k2);
  SolveReport rep;
  const CalibrationEstimate out = refine_photometric(obs, start, opts, rep);
  ASSERT_GE(rep.cost_trace.size(), 2u);
  for (std::size_t k = 1; k < rep.cost_trace.size(); ++k) EXPECT_LE(rep.cost_trace[k], rep.cost_trace[k - 1]);
  EXPECT_LT(rep.final_cost, rep.initial_cost);
  EXPECT_LT(std::abs(out.intrinsics.fx - s.truth.intrinsics.fx), std::abs(start.intrinsics.fx - s.truth.intrinsics.fx));
}

TEST(Solver, FocalPerturbationSingleCleanImage) {
  const auto s = make_scene(self_consistent(tiny_config(1, 13)));
  CalibrationEstimate start = s.truth;
  start.intrinsics.fx *= 1.01;
  start.intrinsics.fy *= 1.01;
  const ObservationSet obs = make_observations(s.images, s.config.board, start);
  SolverOptions opts;
  opts.free_intrinsics = free_intrinsics(DistortionModel::none);
  SolveReport rep;
  refine_photometric(obs, start, opts, rep);
  EXPECT_LE(rep.iterations, 25);
  EXPECT_LT(rep.final_cost, 0.01 * rep.initial_cost);
}

TEST(Solver, GroundTruthStartBarelyMoves) {
  const auto s = make_scene(self_consistent(tiny_config(1, 14)));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  SolverOptions opts;
  opts.free_intrinsics = free_intrinsics(DistortionModel::none);
  SolveReport rep;
  const CalibrationEstimate out = refine_photometric(obs, s.truth, opts, rep);
  const Eigen::VectorXd a = pack(s.truth), b = pack(out);
  for (int k = 0; k < 8; ++k) EXPECT_LE(std::abs(a[k] - b[k]), 1e-6 * std::max(1.0, std::abs(a[k])));
  for (int k = 8; k < 15; ++k) EXPECT_LE(std::abs(a[k] - b[k]), 1e-6 * std::max(1.0, std::abs(a[k])));
}

TEST(Solver, SingleOrientationWarnsAboutConditioning) {
  SyntheticConfig cfg = self_consistent(tiny_config(1, 15));
  const auto s = make_scene(cfg);
  // Second view: same rotation, board shifted.
  auto s2 = s;
  BoardPose moved = s.truth.poses[0];
  moved.t[0] += 0.3;
  moved.t[2] += 0.5;
  s2.truth.poses.push_back(moved);
  s2.truth.sigmas.push_back(s.truth.sigmas[0]);
  s2.images.push_back(render_board_image(cfg.intrinsics, moved, cfg.board, cfg.size, s.truth.sigmas[0]));
  CalibrationEstimate start = s2.truth;
  start.intrinsics.fx *= 1.003;
  const ObservationSet obs = make_observations(s2.images, cfg.board, start);
  SolverOptions opts;
  opts.free_intrinsics = free_intrinsics(DistortionModel::none);
  opts.lm.max_iterations = 30;
  SolveReport rep;
  EXPECT_NO_THROW(refine_photometric(obs, start, opts, rep));
  EXPECT_NE(rep.termination, Termination::not_started);
  EXPECT_GT(rep.global_condition, 1e10);
  bool warned = false;
  for (const auto& w : rep.warnings) warned |= w.find("poorly constrained") != std::string::npos;
  EXPECT_TRUE(warned);
}

TEST(Solver, WellPosedSceneDoesNotWarn) {
  const auto s = make_scene(tiny_config(4, 16));
  const ObservationSet obs = make_observations(s.images, s.config.board, s.truth);
  SolverOptions opts;
  opts.free_intrinsics = free_intrinsics(DistortionModel::none);
  opts.lm.max_iterations = 3;
  SolveReport rep;
  refine_photometric(obs, s.truth, opts, rep);
  EXPECT_LT(rep.global_condition, 1e10);
}

TEST(Calibrate, MaxIterationsZeroReturnsInitial) {
  const auto s = make_scene(tiny_config(3, 17));
  CalibrateOptions opts;
  opts.solver.lm.max_iterations = 0;
  const CalibrationResult r = calibrate(s.images, nullptr, &s.truth, s.config.board, opts);
  EXPECT_EQ(pack(r.refined), pack(r.initial));
  EXPECT_EQ(r.report.iterations, 0);
}

TEST(Calibrate, StageErrors) {
  const auto s = make_scene(tiny_config(2, 18));
  CalibrateOptions opts;
  std::vector<ImageCorners> corners(2);
  corners[1].image_id = 1;
  try {
    calibrate(s.images, &corners, nullptr, s.config.board, opts);
    FAIL();
  } catch (const EstimationError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("initialization:", 0), 0u);
  }
  EXPECT_THROW(calibrate(s.images, nullptr, nullptr, s.config.board, opts), ConfigError);
  CalibrationEstimate wrong = s.truth;
  wrong.poses.pop_back();
  EXPECT_THROW(calibrate(s.images, nullptr, &wrong, s.config.board, opts), EstimationError);
  CalibrationEstimate away = s.truth;
  for (auto& p : away.poses) p.t[0] += 1000;
  EXPECT_THROW(calibrate(s.images, nullptr, &away, s.config.board, opts), SolverError);
}

TEST(Calibrate, ManyCleanImagesRecoverFocal) {
  SyntheticConfig cfg;
  cfg.size = {480, 360};
  cfg.intrinsics = {1000, 1000, 239.5, 179.5, 0, 0, 0, 0};
  cfg.board = {5, 7, 1.0, TextureKind::checkerboard, 1.0};
  cfg.count = 50;
  cfg.seed = 19;
  cfg.noise_sigma = 0;
  cfg.max_tilt_deg = 50;
  const SyntheticDataset ds = generate_synthetic_dataset(cfg);
  std::vector<Image> images;
  std::vector<ImageCorners> corners;
  auto g = photocal::testing::rng(52);
  std::normal_distribution<double> n(0, 0.3);
  for (int i = 0; i < cfg.count; ++i) {
    images.push_back(ds.images[i].image);
    ImageCorners c;
    c.image_id = i;
    for (int j = 0; j < cfg.board.num_points(); ++j) c.corners.push_back({j, {ds.images[i].corners[j].x + n(g), ds.images[i].corners[j].y + n(g)}});
    corners.push_back(c);
  }
  const CalibrationResult r = calibrate(images, &corners, nullptr, cfg.board, {});
  EXPECT_NEAR(r.refined.intrinsics.fx, 1000, 0.5);
  EXPECT_NEAR(r.refined.intrinsics.fy, 1000, 0.5);
}

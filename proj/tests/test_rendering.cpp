#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>

#include "photocal/rendering.hpp"
#include "test_util.hpp"

using namespace photocal;
using photocal::testing::rel_err;
using photocal::testing::uniform;

namespace {

const CameraIntrinsics kCam{1000, 1000, 960, 540, 0, 0, 0, 0};

template <class T>
T render_generic(const std::array<T, 16>& p, const BoardSpec& spec, int j, double px, double py) {
  const BasicIntrinsics<T> c{p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]};
  const Mat3<T> r = rotation_from_quaternion(std::array<T, 4>{p[8], p[9], p[10], p[11]});
  const std::array<T, 3> t{p[12], p[13], p[14]};
  const auto ip = spec.interest_point(j);
  const auto m = projection_stretch(c, r, t, T(ip[0]), T(ip[1]));
  return render_pixel(c, r, t, spec, px, py, p[15], m);
}

SyntheticConfig small_config() {
  SyntheticConfig cfg;
  cfg.size = {320, 240};
  cfg.intrinsics = {300, 300, 159.5, 119.5, 0, 0, 0, 0};
  cfg.board = {5, 7, 1.0, TextureKind::checkerboard, 1.0};
  cfg.count = 2;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST(RenderPixel, BlackCellCenterIsDark) {
  const BoardSpec spec{4, 4, 1.0, TextureKind::checkerboard, 1.0};
  const BoardPose pose{{1, 0, 0, 0}, {0, 0, 10}};
  const PixelPoint px = project(kCam, board_point(pose, 0.5, 0.5));
  EXPECT_LT(render_pixel(kCam, pose, spec, px, 0.1, 0), 0.01);
}

TEST(RenderPixel, SaddleIsHalfForAnySigma) {
  const BoardSpec spec{6, 6, 1.0, TextureKind::checkerboard, 1.0};
  const BoardPose pose = photocal::testing::pose_axis_angle(1, 2, 0, 0.5, -2.5, -2.5, 12);
  const int j = 2 * 6 + 3;
  const auto ip = spec.interest_point(j);
  const PixelPoint px = project(kCam, board_point(pose, ip[0], ip[1]));
  for (double s : {0.05, 0.5, 1.0, 3.0}) EXPECT_NEAR(render_pixel(kCam, pose, spec, px, s, j), 0.5, 1e-9);
}

TEST(RenderPixel, FrontoparallelMatchesBoardUnits) {
  const BoardSpec spec{4, 4, 1.0, TextureKind::checkerboard, 1.0};
  const BoardPose pose{{1, 0, 0, 0}, {0, 0, 1}};
  auto g = photocal::testing::rng(20);
  for (int k = 0; k < 200; ++k) {
    const PixelPoint px{uniform(g, 500, 2000), uniform(g, 0, 1080)};
    const double u = (px.x - 960) / 1000, v = (px.y - 540) / 1000;
    EXPECT_NEAR(render_pixel(kCam, pose, spec, px, 2.0, 0), texture_blurred(spec, u, v, 0.002, 0.002), 1e-12);
  }
}

TEST(RenderPixel, DerivativesMatchFiniteDifferences) {
  using D = Dual<16>;
  const BoardSpec spec{5, 6, 1.0, TextureKind::checkerboard, 1.0};
  auto g = photocal::testing::rng(21);
  int checked = 0;
  while (checked < 1000) {
    const BoardPose pose = normalized(photocal::testing::pose_axis_angle(
        uniform(g, -1, 1), uniform(g, -1, 1), 0, uniform(g, 0, 0.7), -2.5, -2.0, uniform(g, 8, 12)));
    std::array<double, 16> p{uniform(g, 900, 1100), uniform(g, 900, 1100), uniform(g, 940, 980),
                             uniform(g, 520, 560), uniform(g, -0.2, 0.2), uniform(g, -0.05, 0.05),
                             uniform(g, -0.005, 0.005), uniform(g, -0.005, 0.005), pose.q[0], pose.q[1],
                             pose.q[2], pose.q[3], pose.t[0], pose.t[1], pose.t[2], uniform(g, 0.3, 2.0)};
    const int j = static_cast<int>(uniform(g, 0, spec.num_points() - 1e-9));
    const auto ip = spec.interest_point(j);
    BoardPose pp{{p[8], p[9], p[10], p[11]}, {p[12], p[13], p[14]}};
    const CameraIntrinsics c{p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]};
    const PixelPoint centre = project(c, board_point(pp, ip[0] + uniform(g, -0.5, 0.5), ip[1] + uniform(g, -0.5, 0.5)));
    const double px = std::round(centre.x), py = std::round(centre.y);
    std::array<D, 16> pd;
    for (int a = 0; a < 16; ++a) pd[a] = D::variable(p[a], a);
    const D val = render_generic(pd, spec, j, px, py);
    ASSERT_NEAR(val.v, render_generic(p, spec, j, px, py), 1e-12);
    for (int a = 0; a < 16; ++a) {
      // Richardson-extrapolated central differences in extended precision:
      // the blur scale makes plain differences either truncation- or
      // rounding-limited near 1e-5.
      auto central = [&](long double h) {
        std::array<long double, 16> hp, hm;
        std::copy(p.begin(), p.end(), hp.begin());
        std::copy(p.begin(), p.end(), hm.begin());
        hp[a] += h;
        hm[a] -= h;
        return (render_generic(hp, spec, j, px, py) - render_generic(hm, spec, j, px, py)) / (2 * h);
      };
      const double fd = static_cast<double>((4 * central(5e-6L) - central(1e-5L)) / 3);
      EXPECT_LT(rel_err(val.d[a], fd, 1e-4), 1e-5) << "param " << a;
    }
    ++checked;
  }
}

TEST(Neighborhoods, FrontoparallelAreaMatchesProjectedCell) {
  const BoardSpec spec{6, 6, 1.0, TextureKind::checkerboard, 1.0};
  const CameraIntrinsics cam{1000, 1000, 960.3, 540.7, 0, 0, 0, 0};
  const BoardPose pose{{1, 0, 0, 0}, {-0.25, -0.25, 10}};
  const auto nbs = build_neighborhoods(cam, pose, spec, {1920, 1080});
  ASSERT_EQ(nbs.size(), 36u);
  for (const auto& nb : nbs) {
    const auto ip = spec.interest_point(nb.point_index);
    const bool interior = ip[0] > 0 && ip[1] > 0 && ip[0] < 5 && ip[1] < 5;
    // The Manhattan ball of radius a/2 has area a^2 / 2 board units.
    if (interior) EXPECT_NEAR(static_cast<double>(nb.pixels.size()), 5000.0, 150.0);
  }
}

TEST(Neighborhoods, BoardOutsideImage) {
  const BoardSpec spec{3, 3, 1.0, TextureKind::checkerboard, 0};
  std::vector<std::string> warnings;
  const auto nbs = build_neighborhoods(kCam, {{1, 0, 0, 0}, {100, 0, 10}}, spec, {1920, 1080}, 0, &warnings);
  EXPECT_TRUE(nbs.empty());
  EXPECT_EQ(warnings.size(), 9u);
}

TEST(Neighborhoods, DisjointAndWithinHalfSpacing) {
  const BoardSpec spec{5, 7, 0.8, TextureKind::checkerboard, 1.0};
  const CameraIntrinsics cam{700, 690, 321, 238, -0.1, 0.01, 1e-3, 0};
  auto g = photocal::testing::rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    const BoardPose pose = photocal::testing::pose_axis_angle(uniform(g, -1, 1), uniform(g, -1, 1), 0,
                                                              uniform(g, 0, 0.8), -2.4, -1.6, 9);
    const auto nbs = build_neighborhoods(cam, pose, spec, {640, 480});
    std::set<std::pair<int, int>> seen;
    for (const auto& nb : nbs) {
      const auto ip = spec.interest_point(nb.point_index);
      for (const auto& p : nb.pixels) {
        EXPECT_TRUE(seen.insert({p.x, p.y}).second);
        ASSERT_TRUE(p.x >= 0 && p.y >= 0 && p.x < 640 && p.y < 480);
        const Eigen::Vector2d uv = pixel_to_board(cam, pose, {double(p.x), double(p.y)});
        EXPECT_LE(std::abs(uv.x() - ip[0]) + std::abs(uv.y() - ip[1]), 0.4 + 1e-12);
      }
      for (std::size_t k = 1; k < nb.pixels.size(); ++k) {
        const auto& a = nb.pixels[k - 1];
        const auto& b = nb.pixels[k];
        EXPECT_TRUE(a.y < b.y || (a.y == b.y && a.x < b.x));
      }
    }
  }
}

TEST(Neighborhoods, PermutationInvariant) {
  const BoardSpec spec{4, 5, 1.0, TextureKind::checkerboard, 1.0};
  const CameraIntrinsics cam{600, 610, 320.2, 240.9, 0.05, 0, 0, 0};
  const BoardPose pose = photocal::testing::pose_axis_angle(0.3, 1, 0, 0.5, -2, -1.5, 8);
  std::vector<std::array<double, 2>> pts(spec.num_points());
  for (int j = 0; j < spec.num_points(); ++j) pts[j] = spec.interest_point(j);
  std::vector<int> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), photocal::testing::rng(23));
  std::vector<std::array<double, 2>> shuffled(pts.size());
  for (std::size_t k = 0; k < perm.size(); ++k) shuffled[k] = pts[perm[k]];
  const auto a = build_neighborhoods(cam, pose, pts, 1.0, {640, 480});
  const auto b = build_neighborhoods(cam, pose, shuffled, 1.0, {640, 480});
  ASSERT_EQ(a.size(), b.size());
  std::map<int, std::vector<PixelCoord>> by_point;
  for (const auto& nb : a) by_point[nb.point_index] = nb.pixels;
  for (const auto& nb : b) EXPECT_EQ(by_point.at(perm[nb.point_index]), nb.pixels);
}

TEST(RenderBoardImage, MatchesCleanSyntheticImage) {
  SyntheticConfig cfg = small_config();
  cfg.blur_sigma = 0;
  cfg.noise_sigma = 0;
  cfg.intensity_low = 0;
  cfg.intensity_high = 1;
  const SyntheticImage s = generate_synthetic_image(cfg, 0);
  const std::vector<double> sig(cfg.board.num_points(), cfg.render_sigma);
  const Image r = render_board_image(cfg.intrinsics, s.pose, cfg.board, cfg.size, sig);
  double worst = 0;
  for (std::size_t k = 0; k < r.pixels.size(); ++k) worst = std::max(worst, std::abs(r.pixels[k] - s.image.pixels[k]));
  EXPECT_LT(worst, 1e-6);
}

TEST(RenderBoardImage, FocalPerturbationConcentratesAtEdges) {
  const BoardSpec spec{6, 8, 1.0, TextureKind::checkerboard, 1.0};
  const CameraIntrinsics cam{1000, 1000, 959.5, 539.5, 0, 0, 0, 0};
  const BoardPose pose = photocal::testing::pose_axis_angle(1, 0.4, 0, 0.4, -3.5, -2.5, 10);
  const std::vector<double> sig(spec.num_points(), 0.5);
  const Image truth = render_board_image(cam, pose, spec, {1920, 1080}, sig);
  CameraIntrinsics pert = cam;
  pert.fx *= 1.01;
  pert.fy *= 1.01;
  const Image est = render_board_image(pert, pose, spec, {1920, 1080}, sig);
  double total = 0, near_edges = 0;
  for (int y = 0; y < 1080; ++y) {
    for (int x = 0; x < 1920; ++x) {
      const double d = est.at(x, y) - truth.at(x, y);
      if (d == 0) continue;
      total += d * d;
      // Edges of either render: grid lines of the pattern and the board outline.
      double dist = 1e9;
      for (const CameraIntrinsics* c : std::array<const CameraIntrinsics*, 2>{&cam, &pert}) {
        Eigen::Vector2d uv;
        try {
          uv = pixel_to_board(*c, pose, {double(x), double(y)});
        } catch (const std::exception&) {
          continue;
        }
        const auto m = projection_stretch(*c, pose, uv.x(), uv.y());
        if (uv.y() >= -1 && uv.y() <= spec.rows) dist = std::min(dist, std::abs(uv.x() - std::round(uv.x())) * m[0]);
        if (uv.x() >= -1 && uv.x() <= spec.cols) dist = std::min(dist, std::abs(uv.y() - std::round(uv.y())) * m[1]);
        dist = std::min({dist, std::abs(uv.x() + 2) * m[0], std::abs(uv.x() - spec.cols - 1) * m[0],
                         std::abs(uv.y() + 2) * m[1], std::abs(uv.y() - spec.rows - 1) * m[1]});
      }
      if (dist <= 3.0) near_edges += d * d;
    }
  }
  ASSERT_GT(total, 0);
  EXPECT_GT(near_edges / total, 0.9);
}

TEST(RenderPixel, RiseDistanceScalesWithSigma) {
  const BoardSpec spec{6, 6, 1.0, TextureKind::checkerboard, 1.0};
  const BoardPose pose{{1, 0, 0, 0}, {-2.5, -2.5, 10}};
  const CameraIntrinsics cam{1000, 1000, 960, 540, 0, 0, 0, 0};
  // Edge between cells along x at u = 3 (board x = 3 -> pixel 960 + 50).
  auto rise = [&](double sigma) {
    const double y = 540 + 25;  // inside row 2 of cells
    auto f = [&](double x) { return render_pixel(cam, pose, spec, {x, y}, sigma, 2 * 6 + 3); };
    auto solve = [&](double level) {
      double lo = 990, hi = 1030;
      const bool rising = f(hi) > f(lo);
      for (int k = 0; k < 100; ++k) {
        const double mid = 0.5 * (lo + hi);
        ((f(mid) < level) == rising ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    };
    return std::abs(solve(0.9) - solve(0.1));
  };
  const double r1 = rise(1.0), r2 = rise(2.0);
  EXPECT_NEAR(r1, 2 * 1.2815515655446004, 1e-6);
  EXPECT_NEAR(r2 / r1, 2.0, 1e-6);
}

// With a near-sharp model and a binary image, the squared-difference
// objective and the signed sum over white and black rendered regions
// (pixels relative to mid-gray) order candidate poses the same way.
TEST(RenderPixel, SquaredObjectiveRanksLikeSignedSum) {
  const BoardSpec spec{4, 5, 1.0, TextureKind::checkerboard, 1.0};
  const CameraIntrinsics cam{500, 500, 159.5, 119.5, 0, 0, 0, 0};
  const BoardPose truth = photocal::testing::pose_axis_angle(1, 1, 0, 0.3, -2, -1.5, 12);
  const ImageSize size{320, 240};
  const auto nbs = build_neighborhoods(cam, truth, spec, size);
  auto g = photocal::testing::rng(24);
  int agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Image binary(320, 240, 0.5);
    const BoardPose ref = photocal::testing::pose_axis_angle(1, 1, 0, 0.3 + uniform(g, -0.01, 0.01),
                                                             -2 + uniform(g, -0.05, 0.05), -1.5, 12);
    for (const auto& nb : nbs) {
      for (const auto& p : nb.pixels) {
        binary.at(p.x, p.y) = render_pixel(cam, ref, spec, {double(p.x), double(p.y)}, kSigmaMin, nb.point_index) < 0.5 ? 0.0 : 1.0;
      }
    }
    BoardPose cand[2];
    for (auto& c : cand) {
      c = photocal::testing::pose_axis_angle(1, 1, 0, 0.3 + uniform(g, -0.02, 0.02),
                                             -2 + uniform(g, -0.1, 0.1), -1.5 + uniform(g, -0.1, 0.1), 12);
    }
    double sq[2] = {0, 0}, signed_sum[2] = {0, 0};
    for (int k = 0; k < 2; ++k) {
      for (const auto& nb : nbs) {
        for (const auto& p : nb.pixels) {
          const double c = render_pixel(cam, cand[k], spec, {double(p.x), double(p.y)}, kSigmaMin, nb.point_index);
          const double i = binary.at(p.x, p.y);
          sq[k] += (c - i) * (c - i);
          signed_sum[k] += (c >= 0.5 ? 1.0 : -1.0) * (i - 0.5);
        }
      }
    }
    if ((sq[0] < sq[1]) == (signed_sum[0] > signed_sum[1])) ++agree;
  }
  EXPECT_EQ(agree, 100);
}

TEST(DegradeImage, ZeroIsIdentity) {
  Image img(20, 10);
  for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = (k % 7) / 7.0;
  const Image out = degrade_image(img, 0, 0, 5);
  EXPECT_EQ(out.pixels, img.pixels);
}

TEST(DegradeImage, NoiseStandardDeviation) {
  const Image img(1920, 1080, 0.5);
  const Image out = degrade_image(img, 0, 0.03, 99);
  double sum = 0, sq = 0;
  for (double v : out.pixels) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(out.pixels.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  EXPECT_GE(sd, 0.029);
  EXPECT_LE(sd, 0.031);
}

TEST(DegradeImage, DeterministicPerSeedAndUnclamped) {
  const Image img(64, 64, 0.99);
  const Image a = degrade_image(img, 1.0, 0.05, 7), b = degrade_image(img, 1.0, 0.05, 7);
  const Image c = degrade_image(img, 1.0, 0.05, 8);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_NE(a.pixels, c.pixels);
  EXPECT_GT(*std::max_element(a.pixels.begin(), a.pixels.end()), 1.0);
  EXPECT_THROW(degrade_image(img, -1, 0, 1), ConfigError);
}

TEST(GaussianBlur, PreservesConstantsAndMass) {
  const Image flat(30, 20, 0.3);
  for (double v : gaussian_blur(flat, 1.7).pixels) EXPECT_NEAR(v, 0.3, 1e-15);
  Image dot(41, 41, 0.0);
  dot.at(20, 20) = 1.0;
  const Image b = gaussian_blur(dot, 2.0);
  EXPECT_NEAR(std::accumulate(b.pixels.begin(), b.pixels.end(), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(b.at(19, 20), b.at(21, 20), 1e-16);
}

TEST(Synthetic, FullScaleCornersInsideAndRange) {
  SyntheticConfig cfg;  // 1920x1080, f = 1000, 17x24 board
  cfg.count = 2;
  cfg.blur_sigma = 0;
  cfg.noise_sigma = 0;
  const SyntheticDataset ds = generate_synthetic_dataset(cfg);
  ASSERT_EQ(ds.images.size(), 2u);
  for (const auto& im : ds.images) {
    ASSERT_EQ(im.corners.size(), 17u * 24u);
    for (const auto& c : im.corners) {
      EXPECT_TRUE(c.x >= 0 && c.x <= 1919 && c.y >= 0 && c.y <= 1079);
    }
    const auto [lo, hi] = std::minmax_element(im.image.pixels.begin(), im.image.pixels.end());
    EXPECT_GE(*lo, 0.1 - 1e-12);
    EXPECT_LE(*hi, 0.9 + 1e-12);
    // Board tilt stays within the configured bound.
    const Eigen::Matrix3d r = rotation(im.pose);
    EXPECT_LE(std::acos(std::clamp(r(2, 2), -1.0, 1.0)), 60.0 * M_PI / 180.0 + 1e-9);
  }
}

TEST(Synthetic, DeterministicPerSeed) {
  const SyntheticConfig cfg = small_config();
  const SyntheticDataset a = generate_synthetic_dataset(cfg), b = generate_synthetic_dataset(cfg);
  for (int i = 0; i < cfg.count; ++i) {
    EXPECT_EQ(a.images[i].image.pixels, b.images[i].image.pixels);
    EXPECT_EQ(a.images[i].pose.q, b.images[i].pose.q);
  }
  SyntheticConfig other = cfg;
  other.seed = cfg.seed + 1;
  EXPECT_NE(generate_synthetic_dataset(other).images[0].pose.t, a.images[0].pose.t);
}

TEST(Synthetic, ConfigErrors) {
  SyntheticConfig cfg = small_config();
  cfg.count = 0;
  EXPECT_THROW(generate_synthetic_dataset(cfg), ConfigError);
  cfg = small_config();
  cfg.min_span = cfg.max_span = 3.0;  // board wider than the frame
  cfg.max_attempts = 20;
  EXPECT_THROW(generate_synthetic_dataset(cfg), ConfigError);
}

TEST(Synthetic, CornersAreProjectedInterestPoints) {
  const SyntheticConfig cfg = small_config();
  const SyntheticImage s = generate_synthetic_image(cfg, 1);
  const auto again = project_interest_points(cfg.intrinsics, s.pose, cfg.board);
  for (std::size_t j = 0; j < again.size(); ++j) {
    EXPECT_EQ(again[j].x, s.corners[j].x);
    EXPECT_EQ(again[j].y, s.corners[j].y);
  }
}

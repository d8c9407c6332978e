#include "photocal/rendering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include <Eigen/Geometry>

#include "photocal/random.hpp"

namespace photocal {

double render_pixel(const CameraIntrinsics& intr, const BoardPose& pose, const BoardSpec& spec,
                    PixelPoint px, double sigma_px, int point_index) {
  const Mat3<double> r = rotation_from_quaternion(pose.q);
  const auto ip = spec.interest_point(point_index);
  const auto m = projection_stretch(intr, r, pose.t, ip[0], ip[1]);
  return render_pixel(intr, r, pose.t, spec, px.x, px.y, sigma_px, m);
}

namespace {

struct Bounds {
  int x0, y0, x1, y1;  // inclusive
};

// Pixel bounding box of the board region [u0,u1]x[v0,v1], sampled along
// its outline so distortion curvature is covered.
Bounds projected_bounds(const CameraIntrinsics& intr, const Mat3<double>& r,
                        const std::array<double, 3>& t, double u0, double u1, double v0,
                        double v1, double step, ImageSize size) {
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  bool any = false;
  auto visit = [&](double u, double v) {
    const Vec3<double> p = board_point(r, t, u, v);
    if (!(p[2] > 0.0)) return;
    const Vec2<double> px = project(intr, p);
    if (!std::isfinite(px[0]) || !std::isfinite(px[1])) return;
    xmin = std::min(xmin, px[0]);
    xmax = std::max(xmax, px[0]);
    ymin = std::min(ymin, px[1]);
    ymax = std::max(ymax, px[1]);
    any = true;
  };
  const int nu = std::max(2, static_cast<int>(std::ceil((u1 - u0) / step)) + 1);
  const int nv = std::max(2, static_cast<int>(std::ceil((v1 - v0) / step)) + 1);
  for (int k = 0; k < nu; ++k) {
    const double u = u0 + (u1 - u0) * k / (nu - 1);
    visit(u, v0);
    visit(u, v1);
  }
  for (int k = 0; k < nv; ++k) {
    const double v = v0 + (v1 - v0) * k / (nv - 1);
    visit(u0, v);
    visit(u1, v);
  }
  if (!any) return {0, 0, -1, -1};
  const double pad = 2.0;
  auto clampi = [](double x, int lo, int hi) {
    if (!(x > lo)) return lo;
    if (!(x < hi)) return hi;
    return static_cast<int>(x);
  };
  return {clampi(std::floor(xmin - pad), 0, size.width - 1),
          clampi(std::floor(ymin - pad), 0, size.height - 1),
          clampi(std::ceil(xmax + pad), -1, size.width - 1),
          clampi(std::ceil(ymax + pad), -1, size.height - 1)};
}

std::int64_t grid_key(long long col, long long row) {
  return (static_cast<std::int64_t>(col) << 32) ^ static_cast<std::int64_t>(row & 0xffffffffLL);
}

}  // namespace

std::vector<PixelNeighborhood> build_neighborhoods(const CameraIntrinsics& intr,
                                                   const BoardPose& pose,
                                                   std::span<const std::array<double, 2>> points,
                                                   double spacing, ImageSize size,
                                                   int image_index,
                                                   std::vector<std::string>* warnings) {
  validate(intr);
  const Mat3<double> r = rotation_from_quaternion(pose.q);
  const double half = 0.5 * spacing;

  std::unordered_map<std::int64_t, int> index_of;
  double u0 = std::numeric_limits<double>::infinity(), v0 = u0, u1 = -u0, v1 = -u0;
  for (int k = 0; k < static_cast<int>(points.size()); ++k) {
    const long long col = std::llround(points[k][0] / spacing);
    const long long row = std::llround(points[k][1] / spacing);
    index_of.emplace(grid_key(col, row), k);  // first (lowest) index wins duplicates
    u0 = std::min(u0, points[k][0]);
    u1 = std::max(u1, points[k][0]);
    v0 = std::min(v0, points[k][1]);
    v1 = std::max(v1, points[k][1]);
  }

  std::vector<std::vector<PixelCoord>> sets(points.size());
  if (!points.empty()) {
    const Bounds b = projected_bounds(intr, r, pose.t, u0 - half, u1 + half, v0 - half,
                                      v1 + half, 0.05 * spacing, size);
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        Vec2<double> uv;
        try {
          uv = pixel_to_board(intr, r, pose.t, static_cast<double>(x), static_cast<double>(y));
        } catch (const std::exception&) {
          continue;
        }
        const long long cu = static_cast<long long>(std::floor(uv[0] / spacing));
        const long long cv = static_cast<long long>(std::floor(uv[1] / spacing));
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (long long dv = 0; dv <= 1; ++dv) {
          for (long long du = 0; du <= 1; ++du) {
            const auto it = index_of.find(grid_key(cu + du, cv + dv));
            if (it == index_of.end()) continue;
            const auto& p = points[it->second];
            const double dist = std::abs(uv[0] - p[0]) + std::abs(uv[1] - p[1]);
            if (dist > half) continue;
            if (dist < best_dist || (dist == best_dist && it->second < best)) {
              best = it->second;
              best_dist = dist;
            }
          }
        }
        if (best >= 0) sets[best].push_back({x, y});
      }
    }
  }

  std::vector<PixelNeighborhood> out;
  for (int k = 0; k < static_cast<int>(sets.size()); ++k) {
    if (sets[k].empty()) {
      if (warnings) {
        warnings->push_back("image " + std::to_string(image_index) + ": interest point " +
                            std::to_string(k) + " has an empty neighborhood");
      }
      continue;
    }
    out.push_back({image_index, k, std::move(sets[k])});
  }
  return out;
}

std::vector<PixelNeighborhood> build_neighborhoods(const CameraIntrinsics& intr,
                                                   const BoardPose& pose, const BoardSpec& spec,
                                                   ImageSize size, int image_index,
                                                   std::vector<std::string>* warnings) {
  validate(spec);
  std::vector<std::array<double, 2>> points(spec.num_points());
  for (int j = 0; j < spec.num_points(); ++j) points[j] = spec.interest_point(j);
  return build_neighborhoods(intr, pose, points, spec.spacing, size, image_index, warnings);
}

Image render_board_image(const CameraIntrinsics& intr, const BoardPose& pose,
                         const BoardSpec& spec, ImageSize size,
                         std::span<const double> sigma_per_point) {
  validate(intr);
  validate(spec);
  if (sigma_per_point.size() != static_cast<std::size_t>(spec.num_points())) {
    throw ConfigError("render_board_image: one sigma per interest point required");
  }
  const Mat3<double> r = rotation_from_quaternion(pose.q);
  std::vector<std::array<double, 2>> stretch(spec.num_points());
  for (int j = 0; j < spec.num_points(); ++j) {
    const auto ip = spec.interest_point(j);
    stretch[j] = projection_stretch(intr, r, pose.t, ip[0], ip[1]);
  }
  Image img(size.width, size.height, kBackgroundIntensity);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      Vec2<double> uv;
      try {
        uv = pixel_to_board(intr, r, pose.t, static_cast<double>(x), static_cast<double>(y));
      } catch (const std::exception&) {
        continue;
      }
      if (!spec.on_board(uv[0], uv[1])) continue;
      const int col = std::clamp(static_cast<int>(std::lround(uv[0] / spec.spacing)), 0, spec.cols - 1);
      const int row = std::clamp(static_cast<int>(std::lround(uv[1] / spec.spacing)), 0, spec.rows - 1);
      const int j = row * spec.cols + col;
      const double s = sigma_per_point[j];
      img.at(x, y) = texture_blurred(spec, uv[0], uv[1], s / stretch[j][0], s / stretch[j][1]);
    }
  }
  return img;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& w : kernel) w /= total;

  Image tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * img.at(std::clamp(x + k, 0, img.width - 1), y);
      }
      tmp.at(x, y) = acc;
    }
  }
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp.at(x, std::clamp(y + k, 0, img.height - 1));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

Image degrade_image(const Image& img, double sigma_blur, double sigma_noise, std::uint64_t seed) {
  if (sigma_blur < 0.0 || sigma_noise < 0.0) throw ConfigError("degrade_image: negative sigma");
  Image out = gaussian_blur(img, sigma_blur);
  if (sigma_noise > 0.0) {
    std::mt19937_64 rng = make_stream(seed, Stream::image_noise);
    std::normal_distribution<double> noise(0.0, sigma_noise);
    for (double& v : out.pixels) v += noise(rng);
  }
  return out;
}

void validate(const SyntheticConfig& cfg) {
  if (cfg.count <= 0) throw ConfigError("synthetic: count must be positive");
  if (cfg.size.width <= 0 || cfg.size.height <= 0) throw ConfigError("synthetic: bad image size");
  validate(cfg.board);
  try {
    validate(cfg.intrinsics);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("synthetic: ") + e.what());
  }
  if (cfg.blur_sigma < 0.0 || cfg.noise_sigma < 0.0 || cfg.render_sigma < 0.0) {
    throw ConfigError("synthetic: sigmas must be >= 0");
  }
  if (!(cfg.intensity_low >= 0.0 && cfg.intensity_low < cfg.intensity_high && cfg.intensity_high <= 1.0)) {
    throw ConfigError("synthetic: intensity range must satisfy 0 <= low < high <= 1");
  }
  if (!(cfg.min_span > 0.0) || cfg.max_span < cfg.min_span) throw ConfigError("synthetic: bad span range");
  if (cfg.max_tilt_deg < 0.0 || cfg.max_tilt_deg >= 90.0) throw ConfigError("synthetic: tilt must be in [0, 90)");
  if (cfg.max_attempts <= 0) throw ConfigError("synthetic: max_attempts must be positive");
}

std::vector<PixelPoint> project_interest_points(const CameraIntrinsics& intr,
                                                const BoardPose& pose, const BoardSpec& spec) {
  std::vector<PixelPoint> out(spec.num_points());
  for (int j = 0; j < spec.num_points(); ++j) {
    const auto ip = spec.interest_point(j);
    out[j] = project(intr, board_point(pose, ip[0], ip[1]));
  }
  return out;
}

BoardPose sample_board_pose(const SyntheticConfig& cfg, std::uint64_t image_index) {
  std::mt19937_64 rng = make_stream(cfg.seed, Stream::pose, image_index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const BoardSpec& b = cfg.board;
  const CameraIntrinsics& k = cfg.intrinsics;
  const double deg = std::numbers::pi / 180.0;
  const double board_width = (b.cols + 1) * b.spacing;
  const Eigen::Vector3d center((b.cols - 1) * b.spacing / 2.0, (b.rows - 1) * b.spacing / 2.0, 0.0);

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const double span = cfg.min_span + (cfg.max_span - cfg.min_span) * unit(rng);
    const double depth = k.fx * board_width / (span * cfg.size.width);
    const double tilt = cfg.max_tilt_deg * deg * unit(rng);
    const double axis_angle = 2.0 * std::numbers::pi * unit(rng);
    const double roll = cfg.max_roll_deg * deg * (2.0 * unit(rng) - 1.0);
    const double cx = cfg.size.width * (0.5 + cfg.center_jitter * (2.0 * unit(rng) - 1.0));
    const double cy = cfg.size.height * (0.5 + cfg.center_jitter * (2.0 * unit(rng) - 1.0));

    const Eigen::Vector3d axis(std::cos(axis_angle), std::sin(axis_angle), 0.0);
    const Eigen::Matrix3d rot = (Eigen::AngleAxisd(tilt, axis) *
                                 Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()))
                                    .toRotationMatrix();
    const Eigen::Vector3d target(depth * (cx - k.x0) / k.fx, depth * (cy - k.y0) / k.fy, depth);
    const Eigen::Vector3d t = target - rot * center;
    const BoardPose pose = pose_from_rotation(rot, t);

    bool inside = true;
    for (int j = 0; j < b.num_points() && inside; ++j) {
      const auto ip = b.interest_point(j);
      const Eigen::Vector3d p = board_point(pose, ip[0], ip[1]);
      if (!(p.z() > 0.0)) {
        inside = false;
        break;
      }
      const PixelPoint px = project(k, p);
      inside = px.x >= 0.0 && px.x <= cfg.size.width - 1.0 && px.y >= 0.0 &&
               px.y <= cfg.size.height - 1.0;
    }
    if (inside) return pose;
  }
  throw ConfigError("synthetic: pose rejection sampling failed after " +
                    std::to_string(cfg.max_attempts) + " attempts for image " +
                    std::to_string(image_index));
}

SyntheticImage generate_synthetic_image(const SyntheticConfig& cfg, std::uint64_t image_index) {
  SyntheticImage out;
  out.pose = sample_board_pose(cfg, image_index);
  const std::vector<double> sigmas(cfg.board.num_points(), cfg.render_sigma);
  Image clean = render_board_image(cfg.intrinsics, out.pose, cfg.board, cfg.size, sigmas);
  const double scale = cfg.intensity_high - cfg.intensity_low;
  for (double& v : clean.pixels) v = cfg.intensity_low + scale * v;
  // Per-image noise stream: seed mixed with the image index.
  const std::uint64_t noise_seed = cfg.seed * 0x9E3779B97F4A7C15ULL + image_index + 1;
  out.image = degrade_image(clean, cfg.blur_sigma, cfg.noise_sigma, noise_seed);
  out.corners = project_interest_points(cfg.intrinsics, out.pose, cfg.board);
  return out;
}

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg) {
  validate(cfg);
  SyntheticDataset ds;
  ds.config = cfg;
  ds.images.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) {
    ds.images.push_back(generate_synthetic_image(cfg, static_cast<std::uint64_t>(i)));
  }
  return ds;
}

}  // namespace photocal

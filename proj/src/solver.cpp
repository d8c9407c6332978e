#include "photocal/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "photocal/parallel.hpp"

namespace photocal {

double sigma_from_parameter(double theta) {
  return kSigmaMin + (1.0 - kSigmaMin) * std::exp(theta);
}

double parameter_from_sigma(double sigma) {
  const double excess = std::max(sigma - kSigmaMin, 1e-12);
  return std::log(excess / (1.0 - kSigmaMin));
}

Eigen::VectorXd pack(const CalibrationEstimate& e) {
  const int ni = static_cast<int>(e.poses.size());
  if (e.sigmas.size() != e.poses.size()) throw ConfigError("pack: one sigma row per image required");
  const int nj = ni ? static_cast<int>(e.sigmas[0].size()) : 0;
  const ParameterLayout layout{ni, nj};
  Eigen::VectorXd v(layout.size());
  const auto& c = e.intrinsics;
  v.head<8>() << c.fx, c.fy, c.x0, c.y0, c.k1, c.k2, c.p1, c.p2;
  for (int i = 0; i < ni; ++i) {
    const int o = layout.pose_offset(i);
    for (int k = 0; k < 4; ++k) v[o + k] = e.poses[i].q[k];
    for (int k = 0; k < 3; ++k) v[o + 4 + k] = e.poses[i].t[k];
    if (static_cast<int>(e.sigmas[i].size()) != nj) throw ConfigError("pack: ragged sigma rows");
    for (int j = 0; j < nj; ++j) v[layout.sigma_offset(i, j)] = parameter_from_sigma(e.sigmas[i][j]);
  }
  return v;
}

CalibrationEstimate unpack(const ParameterLayout& layout, const Eigen::VectorXd& v) {
  if (v.size() != layout.size()) throw ConfigError("unpack: parameter vector has the wrong length");
  CalibrationEstimate e;
  e.intrinsics = {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
  e.poses.resize(layout.num_images);
  e.sigmas.assign(layout.num_images, std::vector<double>(layout.num_points));
  for (int i = 0; i < layout.num_images; ++i) {
    const int o = layout.pose_offset(i);
    for (int k = 0; k < 4; ++k) e.poses[i].q[k] = v[o + k];
    for (int k = 0; k < 3; ++k) e.poses[i].t[k] = v[o + 4 + k];
    e.poses[i] = normalized(e.poses[i]);
    for (int j = 0; j < layout.num_points; ++j) {
      e.sigmas[i][j] = sigma_from_parameter(v[layout.sigma_offset(i, j)]);
    }
  }
  return e;
}

Eigen::MatrixXd SparseJacobian::to_dense() const {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < kRowNonzeros; ++k) j(r, columns[r][k]) += values[r][k];
  }
  return j;
}

ObservationSet make_observations(std::vector<Image> images, const BoardSpec& board,
                                 const CalibrationEstimate& initial,
                                 std::vector<std::string>* warnings) {
  if (initial.poses.size() != images.size()) throw ConfigError("make_observations: one pose per image required");
  ObservationSet obs;
  obs.board = board;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImageSize size{images[i].width, images[i].height};
    auto nbs = build_neighborhoods(initial.intrinsics, initial.poses[i], board, size,
                                   static_cast<int>(i), warnings);
    for (auto& nb : nbs) obs.neighborhoods.push_back(std::move(nb));
  }
  obs.images = std::move(images);
  return obs;
}

namespace {

constexpr std::size_t kLocal = 16;
using D16 = Dual<kLocal>;

template <class T>
T seeded(double value, std::size_t index) {
  if constexpr (std::is_same_v<T, double>) {
    return value;
  } else {
    return T::variable(value, index);
  }
}

template <class T>
struct NeighborhoodModel {
  BasicIntrinsics<T> c;
  InverseHomography<T> inv;
  std::array<T, 2> stretch;
  T sigma;
};

// Local parameter order: 0-7 intrinsics, 8-11 quaternion, 12-14 translation, 15 blur.
template <class T>
NeighborhoodModel<T> make_model(const Eigen::VectorXd& v, const ParameterLayout& layout,
                                const BoardSpec& board, int i, int j) {
  NeighborhoodModel<T> m;
  std::array<T, 8> g;
  for (std::size_t k = 0; k < 8; ++k) g[k] = seeded<T>(v[k], k);
  m.c = {g[0], g[1], g[2], g[3], g[4], g[5], g[6], g[7]};
  const int o = layout.pose_offset(i);
  std::array<T, 4> q;
  std::array<T, 3> t;
  for (std::size_t k = 0; k < 4; ++k) q[k] = seeded<T>(v[o + k], 8 + k);
  for (std::size_t k = 0; k < 3; ++k) t[k] = seeded<T>(v[o + 4 + k], 12 + k);
  const Mat3<T> r = rotation_from_quaternion(q);
  m.inv = inverse_board_homography(r, t);
  const auto ip = board.interest_point(j);
  m.stretch = projection_stretch(m.c, r, t, T(ip[0]), T(ip[1]));
  using std::exp;
  m.sigma = kSigmaMin + (1.0 - kSigmaMin) * exp(seeded<T>(v[layout.sigma_offset(i, j)], 15));
  return m;
}

template <class T>
T render(const NeighborhoodModel<T>& m, const BoardSpec& board, const PixelCoord& p) {
  const Vec2<T> uv = pixel_to_board(m.c, m.inv, static_cast<double>(p.x), static_cast<double>(p.y));
  return texture_blurred(board, uv[0], uv[1], m.sigma / m.stretch[0], m.sigma / m.stretch[1]);
}

}  // namespace

PhotometricProblem::PhotometricProblem(const ObservationSet& obs, const SolverOptions& options)
    : obs_(obs), options_(options) {
  validate(obs.board);
  layout_ = {static_cast<int>(obs.images.size()), obs.board.num_points()};
  int prev_image = -1, prev_point = -1;
  offsets_.reserve(obs.neighborhoods.size() + 1);
  for (const auto& nb : obs.neighborhoods) {
    if (nb.image_index < 0 || nb.image_index >= layout_.num_images || nb.point_index < 0 ||
        nb.point_index >= layout_.num_points) {
      throw ConfigError("neighborhood refers to a missing image or point");
    }
    if (nb.image_index < prev_image || (nb.image_index == prev_image && nb.point_index <= prev_point)) {
      throw ConfigError("neighborhoods must be sorted by (image, point) without duplicates");
    }
    prev_image = nb.image_index;
    prev_point = nb.point_index;
    offsets_.push_back(static_cast<int>(intensity_.size()));
    const Image& img = obs.images[nb.image_index];
    for (const auto& p : nb.pixels) {
      if (p.x < 0 || p.y < 0 || p.x >= img.width || p.y >= img.height) {
        throw ConfigError("neighborhood pixel outside its image");
      }
      intensity_.push_back(img.at(p.x, p.y));
    }
  }
  offsets_.push_back(static_cast<int>(intensity_.size()));
  last_valid_.resize(intensity_.size());
  for (std::size_t r = 0; r < intensity_.size(); ++r) last_valid_[r] = kBackgroundIntensity - intensity_[r];
  order_.resize(obs.neighborhoods.size());
  std::iota(order_.begin(), order_.end(), 0);

  const int m = 7 + layout_.num_points;
  w_.assign(layout_.num_images, Eigen::MatrixXd::Zero(8, m));
  v_.assign(layout_.num_images, Eigen::MatrixXd::Zero(m, m));
  gi_.assign(layout_.num_images, Eigen::VectorXd::Zero(m));
  u_.setZero();
  gu_.setZero();
  gradient_ = Eigen::VectorXd::Zero(layout_.size());
}

void PhotometricProblem::set_neighborhood_order(std::vector<int> order) {
  std::vector<int> check = order;
  std::sort(check.begin(), check.end());
  for (std::size_t k = 0; k < check.size(); ++k) {
    if (check[k] != static_cast<int>(k) || check.size() != order_.size()) {
      throw ConfigError("set_neighborhood_order: not a permutation");
    }
  }
  order_ = std::move(order);
}

std::array<int, 16> PhotometricProblem::local_columns(int k) const {
  const auto& nb = obs_.neighborhoods[k];
  std::array<int, 16> cols;
  for (int a = 0; a < 8; ++a) cols[a] = a;
  const int o = layout_.pose_offset(nb.image_index);
  for (int a = 0; a < 7; ++a) cols[8 + a] = o + a;
  cols[15] = layout_.sigma_offset(nb.image_index, nb.point_index);
  return cols;
}

void PhotometricProblem::evaluate_values(const Eigen::VectorXd& v, std::vector<double>& r,
                                         long long& failed) const {
  if (v.size() != layout_.size()) throw ConfigError("parameter vector has the wrong length");
  r.resize(intensity_.size());
  const int n = static_cast<int>(obs_.neighborhoods.size());
  std::vector<long long> fails(n, 0);
  parallel_for(n, options_.threads, [&](int k) {
    const auto& nb = obs_.neighborhoods[k];
    const int base = offsets_[k];
    std::optional<NeighborhoodModel<double>> model;
    try {
      model = make_model<double>(v, layout_, obs_.board, nb.image_index, nb.point_index);
    } catch (const std::exception&) {
    }
    for (std::size_t p = 0; p < nb.pixels.size(); ++p) {
      const int idx = base + static_cast<int>(p);
      bool ok = false;
      if (model) {
        try {
          const double c = render(*model, obs_.board, nb.pixels[p]);
          if (std::isfinite(c)) {
            r[idx] = c - intensity_[idx];
            ok = true;
          }
        } catch (const std::exception&) {
        }
      }
      if (!ok) {
        r[idx] = last_valid_[idx];
        ++fails[k];
      }
    }
  });
  failed = std::accumulate(fails.begin(), fails.end(), 0LL);
}

void PhotometricProblem::evaluate_neighborhood(const Eigen::VectorXd& v, int k, LocalSystem* local,
                                               double* residuals,
                                               std::array<double, 16>* jac_rows,
                                               int* /*cols*/) const {
  const auto& nb = obs_.neighborhoods[k];
  const int base = offsets_[k];
  std::optional<NeighborhoodModel<D16>> model;
  try {
    model = make_model<D16>(v, layout_, obs_.board, nb.image_index, nb.point_index);
  } catch (const std::exception&) {
  }
  if (local) {
    local->jtj.setZero();
    local->jtr.setZero();
    local->cost = 0.0;
    local->failed = 0;
  }
  for (std::size_t p = 0; p < nb.pixels.size(); ++p) {
    const int idx = base + static_cast<int>(p);
    D16 c;
    bool ok = false;
    if (model) {
      try {
        c = render(*model, obs_.board, nb.pixels[p]);
        ok = std::isfinite(c.v);
        for (double d : c.d) ok = ok && std::isfinite(d);
      } catch (const std::exception&) {
      }
    }
    double res;
    Eigen::Matrix<double, 16, 1> g;
    if (ok) {
      res = c.v - intensity_[idx];
      for (std::size_t a = 0; a < kLocal; ++a) g[a] = c.d[a];
    } else {
      res = last_valid_[idx];
      g.setZero();
      if (local) ++local->failed;
    }
    if (residuals) residuals[p] = ok ? res : std::numeric_limits<double>::quiet_NaN();
    if (jac_rows) {
      for (std::size_t a = 0; a < kLocal; ++a) jac_rows[p][a] = g[a];
    }
    if (local) {
      local->cost += res * res;
      local->jtj.noalias() += g * g.transpose();
      local->jtr += g * res;
    }
  }
}

Eigen::VectorXd PhotometricProblem::residuals(const Eigen::VectorXd& v) {
  std::vector<double> r;
  long long failed = 0;
  evaluate_values(v, r, failed);
  return Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
}

SparseJacobian PhotometricProblem::jacobian(const Eigen::VectorXd& v) {
  if (v.size() != layout_.size()) throw ConfigError("parameter vector has the wrong length");
  SparseJacobian j;
  j.rows = num_residuals();
  j.cols = layout_.size();
  j.columns.resize(j.rows);
  j.values.resize(j.rows);
  const int n = static_cast<int>(obs_.neighborhoods.size());
  parallel_for(n, options_.threads, [&](int k) {
    const auto cols = local_columns(k);
    const int base = offsets_[k];
    const int count = offsets_[k + 1] - base;
    for (int p = 0; p < count; ++p) j.columns[base + p] = cols;
    evaluate_neighborhood(v, k, nullptr, nullptr, j.values.data() + base, nullptr);
  });
  return j;
}

double PhotometricProblem::cost(const Eigen::VectorXd& v) {
  std::vector<double> r;
  long long failed = 0;
  evaluate_values(v, r, failed);
  failed_ += failed;
  // Deterministic summation in neighborhood order.
  double total = 0.0;
  for (int k : order_) {
    double part = 0.0;
    for (int idx = offsets_[k]; idx < offsets_[k + 1]; ++idx) part += r[idx] * r[idx];
    total += part;
  }
  return total;
}

double PhotometricProblem::linearize(const Eigen::VectorXd& v) {
  if (v.size() != layout_.size()) throw ConfigError("parameter vector has the wrong length");
  linearized_at_ = v;
  const int n = static_cast<int>(obs_.neighborhoods.size());
  std::vector<LocalSystem> locals(n);
  std::vector<double> values(intensity_.size());
  parallel_for(n, options_.threads, [&](int k) {
    evaluate_neighborhood(v, k, &locals[k], values.data() + offsets_[k], nullptr, nullptr);
  });
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    if (!std::isnan(values[idx])) last_valid_[idx] = values[idx];
  }

  u_.setZero();
  gu_.setZero();
  for (auto& w : w_) w.setZero();
  for (auto& vv : v_) vv.setZero();
  for (auto& g : gi_) g.setZero();
  double total = 0.0;
  for (int k : order_) {
    const LocalSystem& l = locals[k];
    const auto& nb = obs_.neighborhoods[k];
    const int i = nb.image_index;
    const int s = 7 + nb.point_index;  // blur column inside the image block
    total += l.cost;
    failed_ += l.failed;
    u_ += l.jtj.topLeftCorner<8, 8>();
    gu_ += l.jtr.head<8>();
    w_[i].leftCols<7>() += l.jtj.block<8, 7>(0, 8);
    w_[i].col(s) += l.jtj.block<8, 1>(0, 15);
    v_[i].topLeftCorner<7, 7>() += l.jtj.block<7, 7>(8, 8);
    v_[i].block(0, s, 7, 1) += l.jtj.block<7, 1>(8, 15);
    v_[i].block(s, 0, 1, 7) += l.jtj.block<1, 7>(15, 8);
    v_[i](s, s) += l.jtj(15, 15);
    gi_[i].head<7>() += l.jtr.segment<7>(8);
    gi_[i][s] += l.jtr[15];
  }

  gradient_.setZero(layout_.size());
  gradient_.head<8>() = gu_;
  for (int k = 0; k < 8; ++k) {
    if (!options_.free_intrinsics[k]) gradient_[k] = 0.0;
  }
  for (int i = 0; i < layout_.num_images; ++i) {
    gradient_.segment<7>(layout_.pose_offset(i)) = gi_[i].head<7>();
    gradient_.segment(layout_.sigma_offset(i, 0), layout_.num_points) = gi_[i].tail(layout_.num_points);
  }
  return total;
}

Eigen::VectorXd PhotometricProblem::full_diagonal() const {
  Eigen::VectorXd d(layout_.size());
  d.head<8>() = u_.diagonal();
  for (int i = 0; i < layout_.num_images; ++i) {
    d.segment<7>(layout_.pose_offset(i)) = v_[i].diagonal().head<7>();
    d.segment(layout_.sigma_offset(i, 0), layout_.num_points) = v_[i].diagonal().tail(layout_.num_points);
  }
  return damping_diagonal(d);
}

bool PhotometricProblem::solve_damped(double lambda, Eigen::VectorXd& delta) {
  return options_.use_schur ? solve_schur(lambda, delta) : solve_dense(lambda, delta);
}

bool PhotometricProblem::solve_dense(double lambda, Eigen::VectorXd& delta) const {
  const int n = layout_.size();
  const int np = layout_.num_points;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  a.topLeftCorner<8, 8>() = u_;
  b.head<8>() = -gu_;
  for (int i = 0; i < layout_.num_images; ++i) {
    std::vector<int> idx(7 + np);
    for (int k = 0; k < 7; ++k) idx[k] = layout_.pose_offset(i) + k;
    for (int j = 0; j < np; ++j) idx[7 + j] = layout_.sigma_offset(i, j);
    for (int r = 0; r < 7 + np; ++r) {
      b[idx[r]] = -gi_[i][r];
      for (int g = 0; g < 8; ++g) {
        a(g, idx[r]) = w_[i](g, r);
        a(idx[r], g) = w_[i](g, r);
      }
      for (int c = 0; c < 7 + np; ++c) a(idx[r], idx[c]) = v_[i](r, c);
    }
  }
  a.diagonal() += lambda * full_diagonal();
  for (int k = 0; k < 8; ++k) {
    if (!options_.free_intrinsics[k]) {
      a.row(k).setZero();
      a.col(k).setZero();
      a(k, k) = 1.0;
      b[k] = 0.0;
    }
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) return false;
  delta = ldlt.solve(b);
  return delta.allFinite();
}

bool PhotometricProblem::solve_schur(double lambda, Eigen::VectorXd& delta) const {
  const int np = layout_.num_points;
  const int m = 7 + np;
  const Eigen::VectorXd d = full_diagonal();
  Eigen::Matrix<double, 8, 8> s = u_;
  s.diagonal() += lambda * d.head<8>();
  Eigen::Matrix<double, 8, 1> rhs = -gu_;
  std::vector<Eigen::MatrixXd> x(layout_.num_images);
  std::vector<Eigen::VectorXd> y(layout_.num_images);
  for (int i = 0; i < layout_.num_images; ++i) {
    Eigen::MatrixXd a = v_[i];
    for (int k = 0; k < 7; ++k) a(k, k) += lambda * d[layout_.pose_offset(i) + k];
    for (int j = 0; j < np; ++j) a(7 + j, 7 + j) += lambda * d[layout_.sigma_offset(i, j)];
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) return false;
    x[i] = ldlt.solve(w_[i].transpose());  // m x 8
    y[i] = ldlt.solve(gi_[i]);
    s.noalias() -= w_[i] * x[i];
    rhs.noalias() += w_[i] * y[i];
  }
  for (int k = 0; k < 8; ++k) {
    if (!options_.free_intrinsics[k]) {
      s.row(k).setZero();
      s.col(k).setZero();
      s(k, k) = 1.0;
      rhs[k] = 0.0;
    }
  }
  const Eigen::LDLT<Eigen::Matrix<double, 8, 8>> ldlt(s);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::Matrix<double, 8, 1> du = ldlt.solve(rhs);
  delta.resize(layout_.size());
  delta.head<8>() = du;
  for (int i = 0; i < layout_.num_images; ++i) {
    const Eigen::VectorXd di = -y[i] - x[i] * du;
    delta.segment<7>(layout_.pose_offset(i)) = di.head<7>();
    delta.segment(layout_.sigma_offset(i, 0), np) = di.tail(np);
  }
  (void)m;
  return delta.allFinite();
}

double PhotometricProblem::reduced_global_condition() const {
  const int np = layout_.num_points;
  const Eigen::VectorXd d = full_diagonal();
  Eigen::Matrix<double, 8, 8> s = u_;
  for (int i = 0; i < layout_.num_images; ++i) {
    // The residuals ignore the quaternion norm; pin that direction instead of
    // damping the whole block, which would mask intrinsic/pose gauges.
    Eigen::MatrixXd a = v_[i];
    const Eigen::Vector4d q = linearized_at_.segment<4>(layout_.pose_offset(i)).normalized();
    a.topLeftCorner<4, 4>() += a.topLeftCorner<4, 4>().trace() * q * q.transpose();
    for (int k = 0; k < 7; ++k) a(k, k) += 1e-15 * d[layout_.pose_offset(i) + k];
    for (int j = 0; j < np; ++j) a(7 + j, 7 + j) += 1e-15 * d[layout_.sigma_offset(i, j)];
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    s.noalias() -= w_[i] * ldlt.solve(w_[i].transpose());
  }
  std::vector<int> free;
  for (int k = 0; k < 8; ++k) {
    if (options_.free_intrinsics[k]) free.push_back(k);
  }
  if (free.empty()) return 1.0;
  Eigen::MatrixXd f(free.size(), free.size());
  for (std::size_t a = 0; a < free.size(); ++a)
    for (std::size_t b = 0; b < free.size(); ++b) f(a, b) = s(free[a], free[b]);
  const Eigen::VectorXd scale = f.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  f = scale.asDiagonal() * f * scale.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

CalibrationEstimate refine_photometric(const ObservationSet& observations,
                                       const CalibrationEstimate& initial,
                                       const SolverOptions& options, SolveReport& report) {
  PhotometricProblem problem(observations, options);
  const Eigen::VectorXd v0 = pack(initial);
  if (v0.size() != problem.num_parameters()) throw SolverError("initial estimate does not match the observations");
  if (!v0.allFinite()) throw SolverError("initial estimate is not finite");
  const Eigen::VectorXd v = levenberg_marquardt(problem, v0, options.lm, report);
  report.failed_evaluations = problem.failed_evaluations();
  report.global_condition = problem.reduced_global_condition();
  if (report.global_condition > 1e10) {
    std::ostringstream msg;
    msg << "intrinsics poorly constrained (reduced condition " << report.global_condition
        << "); use more board orientations";
    report.warnings.push_back(msg.str());
  }
  if (report.failed_evaluations > 0) {
    report.warnings.push_back(std::to_string(report.failed_evaluations) +
                              " residual evaluations fell back to held values");
  }
  // No accepted step: hand back the start exactly rather than a repacked copy.
  if (report.accepted_steps == 0) return initial;
  return unpack(problem.layout(), v);
}

CalibrationResult calibrate(const std::vector<Image>& images,
                            const std::vector<ImageCorners>* corners,
                            const CalibrationEstimate* initial, const BoardSpec& board,
                            const CalibrateOptions& options) {
  if (images.empty()) throw ConfigError("calibrate: at least one image is required");
  validate(board);
  CalibrationResult result;
  if (initial) {
    result.initial = *initial;
    if (result.initial.poses.size() != images.size()) {
      throw EstimationError("initialization: initial calibration has " +
                            std::to_string(result.initial.poses.size()) + " poses for " +
                            std::to_string(images.size()) + " images");
    }
    try {
      validate(result.initial.intrinsics);
    } catch (const DomainError& e) {
      throw EstimationError(std::string("initialization: ") + e.what());
    }
  } else {
    if (!corners) throw ConfigError("calibrate: corners or an initial calibration are required");
    std::vector<ImageCorners> ordered(images.size());
    std::vector<bool> seen(images.size(), false);
    for (const auto& c : *corners) {
      if (c.image_id < 0 || c.image_id >= static_cast<int>(images.size())) {
        throw EstimationError("initialization: corner image id " + std::to_string(c.image_id) +
                              " has no image");
      }
      ordered[c.image_id] = c;
      seen[c.image_id] = true;
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (!seen[i]) throw EstimationError("initialization: no corners for image " + std::to_string(i));
    }
    try {
      const CornerCalibration cc = initial_calibration(
          ordered, board, {images[0].width, images[0].height}, options.init_model, options.corner_lm);
      result.initial.intrinsics = cc.intrinsics;
      result.initial.poses = cc.poses;
      result.initial_corner_rms = cc.rms_after;
    } catch (const EstimationError& e) {
      throw EstimationError(std::string("initialization: ") + e.what());
    } catch (const DomainError& e) {
      throw EstimationError(std::string("initialization: ") + e.what());
    } catch (const NumericError& e) {
      throw EstimationError(std::string("initialization: ") + e.what());
    }
  }
  if (result.initial.sigmas.size() != images.size()) {
    result.initial.sigmas.assign(images.size(),
                                 std::vector<double>(board.num_points(), options.initial_sigma));
  }

  ObservationSet obs;
  try {
    obs = make_observations(images, board, result.initial, &result.warnings);
  } catch (const std::exception& e) {
    throw SolverError(std::string("neighborhoods: ") + e.what());
  }
  result.num_neighborhoods = static_cast<int>(obs.neighborhoods.size());
  if (obs.neighborhoods.empty()) throw SolverError("neighborhoods: the board is not visible in any image");

  SolverOptions solver = options.solver;
  solver.free_intrinsics = photocal::free_intrinsics(options.refine_model);
  try {
    result.refined = refine_photometric(obs, result.initial, solver, result.report);
  } catch (const SolverError&) {
    throw;
  } catch (const std::exception& e) {
    throw SolverError(std::string("solver: ") + e.what());
  }
  {
    PhotometricProblem counter(obs, solver);
    result.num_residuals = counter.num_residuals();
  }
  for (const auto& w : result.report.warnings) result.warnings.push_back(w);
  return result;
}

}  // namespace photocal

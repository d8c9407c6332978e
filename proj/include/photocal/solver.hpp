#pragma once

// Photometric refinement: residuals C_i(x, y, sigma_ij) - I_i(x, y) over the
// interest-point neighborhoods of every image, exact forward-mode Jacobians,
// and Levenberg-Marquardt with optional Schur elimination of the per-image
// pose/blur blocks.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "photocal/geometry.hpp"
#include "photocal/image.hpp"
#include "photocal/init_calib.hpp"
#include "photocal/lm.hpp"
#include "photocal/rendering.hpp"
#include "photocal/texture.hpp"

namespace photocal {

struct CalibrationEstimate {
  CameraIntrinsics intrinsics;
  std::vector<BoardPose> poses;              // one per image
  std::vector<std::vector<double>> sigmas;   // [image][interest point], pixels
};

/// Images plus the frozen neighborhoods, sorted by (image, point).
struct ObservationSet {
  BoardSpec board;
  std::vector<Image> images;
  std::vector<PixelNeighborhood> neighborhoods;
};

/// Builds neighborhoods for every image from an initial estimate.
ObservationSet make_observations(std::vector<Image> images, const BoardSpec& board,
                                 const CalibrationEstimate& initial,
                                 std::vector<std::string>* warnings = nullptr);

/// Layout: (fx, fy, x0, y0, k1, k2, p1, p2), then per image (qw, qx, qy, qz,
/// tx, ty, tz), then per (image, point) the blur parameter.
struct ParameterLayout {
  int num_images = 0;
  int num_points = 0;

  int size() const { return 8 + 7 * num_images + num_images * num_points; }
  int pose_offset(int i) const { return 8 + 7 * i; }
  int sigma_offset(int i, int j) const { return 8 + 7 * num_images + i * num_points + j; }
};

/// Blur is stored as theta with sigma = sigma_min + (1 - sigma_min) exp(theta),
/// so sigma = 1 px maps to 0 and sigma never drops below sigma_min.
double sigma_from_parameter(double theta);
double parameter_from_sigma(double sigma);

Eigen::VectorXd pack(const CalibrationEstimate& estimate);
CalibrationEstimate unpack(const ParameterLayout& layout, const Eigen::VectorXd& v);

/// Per-row sparse Jacobian: every residual touches 16 parameters.
struct SparseJacobian {
  static constexpr int kRowNonzeros = 16;
  int rows = 0;
  int cols = 0;
  std::vector<std::array<int, kRowNonzeros>> columns;
  std::vector<std::array<double, kRowNonzeros>> values;

  Eigen::MatrixXd to_dense() const;
};

struct SolverOptions {
  LmOptions lm;
  std::array<bool, 8> free_intrinsics = photocal::free_intrinsics(DistortionModel::full);
  bool use_schur = true;
  int threads = 1;
};

class PhotometricProblem final : public LeastSquaresProblem {
 public:
  PhotometricProblem(const ObservationSet& observations, const SolverOptions& options);

  const ParameterLayout& layout() const { return layout_; }
  int num_residuals() const { return static_cast<int>(intensity_.size()); }
  int num_parameters() const override { return layout_.size(); }

  /// Residuals in (image, point, row-major pixel) order.
  Eigen::VectorXd residuals(const Eigen::VectorXd& v);
  SparseJacobian jacobian(const Eigen::VectorXd& v);

  double cost(const Eigen::VectorXd& v) override;
  double linearize(const Eigen::VectorXd& v) override;
  const Eigen::VectorXd& gradient() const override { return gradient_; }
  bool solve_damped(double lambda, Eigen::VectorXd& delta) override;

  /// Evaluations that fell back to a held residual so far.
  long long failed_evaluations() const { return failed_; }

  /// Condition number of the Jacobi-scaled reduced system over the free
  /// intrinsics at the last linearization.
  double reduced_global_condition() const;

  /// Neighborhood processing order; defaults to the identity.
  void set_neighborhood_order(std::vector<int> order);

 private:
  struct LocalSystem {
    Eigen::Matrix<double, 16, 16> jtj;
    Eigen::Matrix<double, 16, 1> jtr;
    double cost = 0.0;
    long long failed = 0;
  };

  void evaluate_values(const Eigen::VectorXd& v, std::vector<double>& r, long long& failed) const;
  void evaluate_neighborhood(const Eigen::VectorXd& v, int k, LocalSystem* local,
                             double* residuals,
                             std::array<double, 16>* jac_rows, int* cols) const;
  std::array<int, 16> local_columns(int k) const;
  bool solve_dense(double lambda, Eigen::VectorXd& delta) const;
  bool solve_schur(double lambda, Eigen::VectorXd& delta) const;
  Eigen::VectorXd full_diagonal() const;

  const ObservationSet& obs_;
  SolverOptions options_;
  ParameterLayout layout_;
  std::vector<int> offsets_;      // first residual of each neighborhood
  std::vector<double> intensity_; // observed I(x, y) per residual
  std::vector<double> last_valid_;
  std::vector<int> order_;
  long long failed_ = 0;

  // Block normal equations: U (8x8), W_i (8 x m), V_i (m x m), m = 7 + points.
  Eigen::Matrix<double, 8, 8> u_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::MatrixXd> v_;
  Eigen::Matrix<double, 8, 1> gu_;
  std::vector<Eigen::VectorXd> gi_;
  Eigen::VectorXd gradient_;
  Eigen::VectorXd linearized_at_;
};

/// Runs LM on the photometric objective starting from `initial`.
CalibrationEstimate refine_photometric(const ObservationSet& observations,
                                       const CalibrationEstimate& initial,
                                       const SolverOptions& options, SolveReport& report);

struct CalibrateOptions {
  DistortionModel init_model = DistortionModel::none;
  DistortionModel refine_model = DistortionModel::none;
  SolverOptions solver;
  LmOptions corner_lm;
  double initial_sigma = 1.0;  // px
};

struct CalibrationResult {
  CalibrationEstimate initial;
  CalibrationEstimate refined;
  SolveReport report;
  double initial_corner_rms = 0.0;  // px, when initialized from corners
  int num_neighborhoods = 0;
  int num_residuals = 0;
  std::vector<std::string> warnings;
};

/// Full pipeline: corner-based initialization (unless `initial` is given),
/// neighborhood construction, photometric LM.
/// Throws EstimationError (initialization) or SolverError (refinement).
CalibrationResult calibrate(const std::vector<Image>& images,
                            const std::vector<ImageCorners>* corners,
                            const CalibrationEstimate* initial, const BoardSpec& board,
                            const CalibrateOptions& options);

}  // namespace photocal

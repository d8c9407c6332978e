#pragma once

// Levenberg-Marquardt on the normal equations with multiplicative
// (Marquardt) damping: (J^T J + lambda diag(J^T J)) delta = -J^T r.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace photocal {

struct LmOptions {
  int max_iterations = 100;
  double initial_lambda = 1e-3;
  double lambda_increase = 10.0;
  double lambda_decrease = 10.0;
  double max_lambda = 1e12;
  double relative_cost_tolerance = 1e-8;
  double gradient_tolerance = 1e-10;
  double parameter_tolerance = 1e-12;  // |delta| <= tol (|v| + tol) stops
};

enum class Termination {
  not_started,
  relative_cost,
  gradient,
  max_iterations,
  lambda_overflow,
  small_step,
};

std::string to_string(Termination t);

struct SolveReport {
  int iterations = 0;           // attempted steps, accepted or not
  int accepted_steps = 0;
  double initial_cost = 0.0;    // sum of squared residuals
  double final_cost = 0.0;
  Termination termination = Termination::not_started;
  std::vector<double> cost_trace;  // initial cost, then the cost after each accepted step
  long long failed_evaluations = 0;  // residuals held at their last valid value
  double global_condition = 0.0;     // conditioning of the reduced global block, if computed
  std::vector<std::string> warnings;
};

/// Interface between the LM driver and a problem that owns its normal
/// equations. linearize() evaluates and stores J^T J and J^T r at v;
/// solve_damped() solves the damped system for the last linearization.
class LeastSquaresProblem {
 public:
  virtual ~LeastSquaresProblem() = default;
  virtual int num_parameters() const = 0;
  /// Sum of squared residuals.
  virtual double cost(const Eigen::VectorXd& v) = 0;
  /// Returns the cost at v.
  virtual double linearize(const Eigen::VectorXd& v) = 0;
  /// J^T r from the last linearization.
  virtual const Eigen::VectorXd& gradient() const = 0;
  virtual bool solve_damped(double lambda, Eigen::VectorXd& delta) = 0;
};

/// Damping diagonal: diag(J^T J) with a small floor so parameters that do not
/// currently influence the residuals still get a positive pivot.
Eigen::VectorXd damping_diagonal(const Eigen::VectorXd& jtj_diagonal);

/// Dense normal equations with an optional fixed-parameter mask. Fixed
/// parameters receive a zero step.
class DenseNormalEquations {
 public:
  Eigen::MatrixXd jtj;
  Eigen::VectorXd jtr;
  std::vector<bool> fixed;  // empty = all free

  void reset(int n);
  void accumulate(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& residuals);
  bool solve(double lambda, Eigen::VectorXd& delta) const;
};

Eigen::VectorXd levenberg_marquardt(LeastSquaresProblem& problem, Eigen::VectorXd v0,
                                    const LmOptions& options, SolveReport& report);

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFunction = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Convenience overload for small dense problems.
Eigen::VectorXd levenberg_marquardt(const ResidualFunction& residuals,
                                    const JacobianFunction& jacobian, Eigen::VectorXd v0,
                                    const LmOptions& options, SolveReport& report,
                                    std::vector<bool> fixed = {});

}  // namespace photocal

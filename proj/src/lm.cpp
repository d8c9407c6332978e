#include "photocal/lm.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "photocal/errors.hpp"

namespace photocal {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::not_started: return "not_started";
    case Termination::relative_cost: return "relative_cost";
    case Termination::gradient: return "gradient";
    case Termination::max_iterations: return "max_iterations";
    case Termination::lambda_overflow: return "lambda_overflow";
    case Termination::small_step: return "small_step";
  }
  return "unknown";
}

Eigen::VectorXd damping_diagonal(const Eigen::VectorXd& d) {
  const double floor = 1e-12 * std::max(1.0, d.size() ? d.maxCoeff() : 0.0);
  return d.cwiseMax(floor);
}

void DenseNormalEquations::reset(int n) {
  jtj = Eigen::MatrixXd::Zero(n, n);
  jtr = Eigen::VectorXd::Zero(n);
}

void DenseNormalEquations::accumulate(const Eigen::MatrixXd& j, const Eigen::VectorXd& r) {
  jtj.selfadjointView<Eigen::Lower>().rankUpdate(j.transpose());
  jtj = jtj.selfadjointView<Eigen::Lower>();
  jtr += j.transpose() * r;
}

bool DenseNormalEquations::solve(double lambda, Eigen::VectorXd& delta) const {
  const int n = static_cast<int>(jtr.size());
  Eigen::MatrixXd a = jtj;
  Eigen::VectorXd b = -jtr;
  const Eigen::VectorXd d = damping_diagonal(jtj.diagonal());
  a.diagonal() += lambda * d;
  for (int k = 0; k < n; ++k) {
    if (!fixed.empty() && fixed[k]) {
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

Eigen::VectorXd levenberg_marquardt(LeastSquaresProblem& problem, Eigen::VectorXd v,
                                    const LmOptions& options, SolveReport& report) {
  report = SolveReport{};
  // The acceptance test and the trace use cost() throughout; linearize() may
  // round differently (dual arithmetic).
  problem.linearize(v);
  double cost = problem.cost(v);
  if (!std::isfinite(cost)) throw SolverError("levenberg_marquardt: non-finite initial cost");
  report.initial_cost = cost;
  report.final_cost = cost;
  report.cost_trace.push_back(cost);
  report.termination = Termination::max_iterations;
  double lambda = options.initial_lambda;
  Eigen::VectorXd delta;

  while (report.iterations < options.max_iterations) {
    const Eigen::VectorXd& g = problem.gradient();
    if (g.size() == 0 || g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      report.termination = Termination::gradient;
      break;
    }
    ++report.iterations;
    double trial_cost = std::numeric_limits<double>::infinity();
    Eigen::VectorXd trial;
    if (problem.solve_damped(lambda, delta)) {
      if (delta.norm() <= options.parameter_tolerance * (v.norm() + options.parameter_tolerance)) {
        report.termination = Termination::small_step;
        break;
      }
      trial = v + delta;
      trial_cost = problem.cost(trial);
    }
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      const double relative = (cost - trial_cost) / cost;
      v = std::move(trial);
      ++report.accepted_steps;
      report.cost_trace.push_back(trial_cost);
      lambda = std::max(lambda / options.lambda_decrease, 1e-15);
      cost = trial_cost;
      problem.linearize(v);
      if (relative < options.relative_cost_tolerance) {
        report.termination = Termination::relative_cost;
        break;
      }
    } else {
      lambda *= options.lambda_increase;
      if (lambda > options.max_lambda) {
        report.termination = Termination::lambda_overflow;
        break;
      }
    }
  }
  report.final_cost = cost;
  return v;
}

namespace {

class DenseFunctionProblem final : public LeastSquaresProblem {
 public:
  DenseFunctionProblem(const ResidualFunction& r, const JacobianFunction& j, int n,
                       std::vector<bool> fixed)
      : residuals_(r), jacobian_(j), n_(n) {
    normal_.fixed = std::move(fixed);
  }
  int num_parameters() const override { return n_; }
  double cost(const Eigen::VectorXd& v) override { return residuals_(v).squaredNorm(); }
  double linearize(const Eigen::VectorXd& v) override {
    const Eigen::VectorXd r = residuals_(v);
    const Eigen::MatrixXd j = jacobian_(v);
    normal_.reset(n_);
    normal_.accumulate(j, r);
    gradient_ = normal_.jtr;
    for (int k = 0; k < n_; ++k) {
      if (!normal_.fixed.empty() && normal_.fixed[k]) gradient_[k] = 0.0;
    }
    return r.squaredNorm();
  }
  const Eigen::VectorXd& gradient() const override { return gradient_; }
  bool solve_damped(double lambda, Eigen::VectorXd& delta) override {
    return normal_.solve(lambda, delta);
  }

 private:
  const ResidualFunction& residuals_;
  const JacobianFunction& jacobian_;
  int n_;
  DenseNormalEquations normal_;
  Eigen::VectorXd gradient_;
};

}  // namespace

Eigen::VectorXd levenberg_marquardt(const ResidualFunction& residuals,
                                    const JacobianFunction& jacobian, Eigen::VectorXd v0,
                                    const LmOptions& options, SolveReport& report,
                                    std::vector<bool> fixed) {
  DenseFunctionProblem problem(residuals, jacobian, static_cast<int>(v0.size()), std::move(fixed));
  return levenberg_marquardt(problem, std::move(v0), options, report);
}

}  // namespace photocal

// Damped least-squares (Levenberg-Marquardt) engine used by every nonlinear fit.
#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace vibronix {

struct LmOptions {
  int max_iterations = 500;
  double initial_lambda = 1e-3;
  double accept_factor = 0.5;  // lambda *= accept_factor after an accepted step
  double reject_factor = 4.0;  // lambda *= reject_factor after a rejected step
  double cost_rtol = 1e-10;
  double step_tol = 1e-12;
};

/// Fills residuals r(p) and, when `jacobian` is non-null, dr/dp.
/// Returning false marks p as infeasible; the step is rejected.
using ResidualFn =
    std::function<bool(const Eigen::VectorXd& p, Eigen::VectorXd& residuals, Eigen::MatrixXd* jacobian)>;

struct LmResult {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> accepted_costs;  // cost after every accepted step, starting with the initial cost

  double residual_norm() const { return std::sqrt(cost); }
  int dof() const { return static_cast<int>(residuals.size()) - static_cast<int>(params.size()); }

  /// s^2 (J^T J)^-1 with s^2 = cost / dof. Singular directions get +inf variance.
  Eigen::MatrixXd covariance(bool scale_by_residual_variance = true) const;
};

/// Minimizes ||r(p)||^2 from `initial`. Never throws on non-convergence; callers
/// inspect `converged` and decide.
LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& initial,
                             const LmOptions& options = {});

/// Central-difference Jacobian, for models without analytic derivatives.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& p, Eigen::Index m);

/// Ordinary (optionally weighted) linear least squares y ~ X beta.
struct LinearFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;  // scaled by residual variance
  double rss = 0.0;
  int dof = 0;
  double condition = 0.0;  // of the column-normalized design matrix
};
LinearFit linear_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const Eigen::VectorXd* weights = nullptr);

}  // namespace vibronix

#include "vibronix/least_squares.hpp"

#include <cmath>
#include <limits>

namespace vibronix {

Eigen::MatrixXd LmResult::covariance(bool scale_by_residual_variance) const {
  const Eigen::Index p = params.size();
  const Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jtj);
  const double max_ev = eig.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(p);
  bool singular = false;
  for (Eigen::Index i = 0; i < p; ++i) {
    const double ev = eig.eigenvalues()(i);
    if (ev > max_ev * 1e-14 && ev > 0.0) {
      inv(i) = 1.0 / ev;
    } else {
      singular = true;
    }
  }
  Eigen::MatrixXd cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  if (singular) {
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index k = 0; k < p; ++k) {
        const double ev = eig.eigenvalues()(k);
        if (!(ev > max_ev * 1e-14 && ev > 0.0) && std::abs(eig.eigenvectors()(i, k)) > 1e-8) {
          cov(i, i) = std::numeric_limits<double>::infinity();
        }
      }
    }
  }
  if (scale_by_residual_variance) {
    const int d = dof();
    const double s2 = d > 0 ? cost / d : 0.0;
    cov *= s2;
  }
  return cov;
}

Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& p, Eigen::Index m) {
  Eigen::MatrixXd jac(m, p.size());
  Eigen::VectorXd rp(m), rm(m);
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(p(j)));
    Eigen::VectorXd pp = p, pm = p;
    pp(j) += h;
    pm(j) -= h;
    fn(pp, rp, nullptr);
    fn(pm, rm, nullptr);
    jac.col(j) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& initial,
                             const LmOptions& options) {
  LmResult out;
  out.params = initial;
  Eigen::MatrixXd jac;
  if (!fn(out.params, out.residuals, &jac)) {
    out.stop_reason = "initial parameters infeasible";
    out.cost = std::numeric_limits<double>::infinity();
    return out;
  }
  if (jac.size() == 0) jac = numeric_jacobian(fn, out.params, out.residuals.size());
  out.jacobian = jac;
  out.cost = out.residuals.squaredNorm();
  out.accepted_costs.push_back(out.cost);

  double lambda = options.initial_lambda;
  Eigen::VectorXd trial_r;
  Eigen::MatrixXd trial_j;
  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    if (out.cost == 0.0) {
      out.converged = true;
      out.stop_reason = "zero residual";
      return out;
    }
    const Eigen::MatrixXd jtj = out.jacobian.transpose() * out.jacobian;
    const Eigen::VectorXd grad = out.jacobian.transpose() * out.residuals;
    Eigen::VectorXd diag = jtj.diagonal();
    const double diag_floor = std::max(diag.maxCoeff() * 1e-15, std::numeric_limits<double>::min());
    for (Eigen::Index i = 0; i < diag.size(); ++i) diag(i) = std::max(diag(i), diag_floor);

    Eigen::MatrixXd a = jtj;
    a.diagonal() += lambda * diag;
    const Eigen::VectorXd step = a.ldlt().solve(-grad);

    if (!step.allFinite()) {
      lambda *= options.reject_factor;
      continue;
    }
    if (step.norm() < options.step_tol * (out.params.norm() + options.step_tol)) {
      out.converged = true;
      out.stop_reason = "step below tolerance";
      return out;
    }

    const Eigen::VectorXd trial = out.params + step;
    trial_j.resize(0, 0);
    const bool feasible = fn(trial, trial_r, &trial_j);
    const double trial_cost = feasible ? trial_r.squaredNorm() : std::numeric_limits<double>::infinity();
    if (feasible && std::isfinite(trial_cost) && trial_cost <= out.cost) {
      const double rel = (out.cost - trial_cost) / std::max(out.cost, std::numeric_limits<double>::min());
      out.params = trial;
      out.residuals = trial_r;
      out.jacobian = trial_j.size() == 0 ? numeric_jacobian(fn, out.params, out.residuals.size()) : trial_j;
      out.cost = trial_cost;
      out.accepted_costs.push_back(out.cost);
      lambda *= options.accept_factor;
      if (rel < options.cost_rtol) {
        out.converged = true;
        out.stop_reason = "relative cost change below tolerance";
        return out;
      }
    } else {
      lambda *= options.reject_factor;
      if (lambda > 1e20) {
        // No downhill step exists at any damping: stationary point.
        out.converged = true;
        out.stop_reason = "no further decrease possible";
        return out;
      }
    }
  }
  out.stop_reason = "maximum iterations exceeded";
  return out;
}

LinearFit linear_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const Eigen::VectorXd* weights) {
  Eigen::MatrixXd x = design;
  Eigen::VectorXd t = y;
  if (weights != nullptr) {
    const Eigen::VectorXd sw = weights->cwiseSqrt();
    x = sw.asDiagonal() * x;
    t = sw.asDiagonal() * t;
  }
  // Column normalization keeps T^4-style designs well scaled.
  Eigen::VectorXd scale(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double n = x.col(j).norm();
    scale(j) = n > 0.0 ? n : 1.0;
  }
  const Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  LinearFit fit;
  fit.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  const Eigen::VectorXd beta_s = svd.solve(t);
  fit.beta = beta_s.cwiseQuotient(scale);
  const Eigen::VectorXd resid = t - x * fit.beta;
  fit.rss = resid.squaredNorm();
  fit.dof = static_cast<int>(x.rows() - x.cols());
  Eigen::VectorXd inv_sv2(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    inv_sv2(i) = sv(i) > 0.0 ? 1.0 / (sv(i) * sv(i)) : std::numeric_limits<double>::infinity();
  }
  const Eigen::MatrixXd cov_s = svd.matrixV() * inv_sv2.asDiagonal() * svd.matrixV().transpose();
  const double s2 = fit.dof > 0 ? fit.rss / fit.dof : 0.0;
  fit.covariance = scale.cwiseInverse().asDiagonal() * cov_s * scale.cwiseInverse().asDiagonal() * s2;
  return fit;
}

}  // namespace vibronix

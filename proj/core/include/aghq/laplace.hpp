#pragma once

#include <Eigen/Dense>

#include "aghq/model_api.hpp"

namespace aghq {

struct InnerOptions {
  double gradient_tol = 1e-8;  // on the infinity norm
  int max_iterations = 100;
  double armijo = 1e-4;
  int max_halvings = 60;
};

struct InnerMode {
  VectorXd x_hat;
  double log_joint = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Newton ascent on x -> log p(y, x, theta) with halving backtracking. When
/// the Newton system is not positive definite the iteration takes a gradient
/// step instead. Returns the best iterate, flagged, if it does not converge.
/// An empty or wrongly sized `x0` starts from zero.
InnerMode inner_mode(const LogJointModel& model, const VectorXd& theta, const VectorXd& x0,
                     const InnerOptions& options = {});

/// Laplace approximation of p(theta, y) around the conditional mode.
struct InnerFit {
  VectorXd theta;
  VectorXd x_hat;
  MatrixXd hessian_factor;  // lower L with H(theta) = L L^T
  double log_det_hessian = 0.0;
  double log_joint_at_mode = 0.0;
  double log_laplace = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// log p_LA(theta, y) = log p(y, x_hat, theta) + (N/2) log 2 pi - 1/2 log|H|.
/// For N = 0 this is log p(y, theta). Throws CurvatureError (carrying theta)
/// when H(theta) at the mode cannot be factorized.
InnerFit log_laplace(const LogJointModel& model, const VectorXd& theta, const VectorXd& warm_start,
                     const InnerOptions& options = {});

}  // namespace aghq

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aghq/ghq_rules.hpp"
#include "aghq/laplace.hpp"
#include "aghq/model_api.hpp"

namespace aghq {

struct OuterOptions {
  double gradient_tol = 1e-6;  // infinity norm of the finite-difference gradient
  double step_tol = 1e-8;      // infinity norm of the accepted parameter step
  int max_iterations = 500;
  double max_step = 5.0;  // longest trial step per coordinate
  int threads = 1;
  InnerOptions inner;
};

struct OuterResult {
  VectorXd theta_hat;
  VectorXd x_hat;  // latent mode at theta_hat, reused as a warm start
  double log_laplace = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::vector<std::string> trace;
};

/// Maximizes theta -> log p_LA(theta, y) by BFGS with central-difference
/// gradients. The inverse-Hessian approximation is seeded from a
/// finite-difference Hessian at theta0 when that is positive definite.
/// Throws OptimizerError (with the iteration trace) after max_iterations.
OuterResult outer_optimize(const LogJointModel& model, const VectorXd& theta0, const OuterOptions& options = {});

enum class Decomposition { Cholesky, Spectral };

std::string to_string(Decomposition d);
Decomposition parse_decomposition(const std::string& text);

struct ModeCurvature {
  VectorXd theta_hat;
  MatrixXd curvature;        // -Hessian of log p_LA at theta_hat
  MatrixXd inverse;          // inverse curvature
  VectorXd eigenvalues;      // of the inverse, descending
  MatrixXd eigenvectors;     // orthonormal columns matching eigenvalues
  MatrixXd cholesky_factor;  // lower L with inverse = L L^T

  std::size_t dim() const { return static_cast<std::size_t>(theta_hat.size()); }
};

/// Decomposes a given curvature. Eigenvectors are signed so that each
/// column's largest-magnitude entry is positive; ties in eigenvalue keep the
/// solver's order. Throws CurvatureError unless the curvature is positive
/// definite.
ModeCurvature make_mode_curvature(const VectorXd& theta_hat, const MatrixXd& curvature);

struct CurvatureOptions {
  // Base step h_j = base_step * max(1, |theta_j|); central second
  // differences at h and h/2 are Richardson-extrapolated.
  double base_step = 1e-2;
  int threads = 1;
  InnerOptions inner;
};

MatrixXd richardson_hessian(const ScalarFunction& f, const VectorXd& point, double base_step, int threads = 1);

ModeCurvature outer_curvature(const LogJointModel& model, const VectorXd& theta_hat, const VectorXd& x_hat,
                              const CurvatureOptions& options = {});

struct PcaSelection {
  std::size_t s = 0;
  double variance_explained = 0.0;
  double threshold = 0.0;  // 0 when s was fixed by the caller
};

// Cumulative share of total variance, one entry per rank 1..m.
std::vector<double> cumulative_proportions(const ModeCurvature& curvature);

// Smallest s with cumulative proportion >= threshold, 0 < threshold <= 1.
PcaSelection select_rank(const ModeCurvature& curvature, double threshold);
PcaSelection fixed_rank(const ModeCurvature& curvature, std::size_t s);

struct AdaptedGrid {
  QuadratureGrid base;
  MatrixXd transform;  // P with inverse curvature = P P^T
  VectorXd center;
  MatrixXd theta_points;  // row p = P z_p + center
  double log_abs_det_transform = 0.0;
  Decomposition decomposition = Decomposition::Spectral;

  std::size_t size() const { return base.size(); }
};

/// Adapts a product grid to the mode and inverse curvature. Levels refer to
/// eigen-directions in descending eigenvalue order for the spectral
/// decomposition, so GridSpec::pca(m, s, k) gives PCA-AGHQ. The Cholesky
/// decomposition only accepts uniform levels. The determinant prefactor
/// always covers all m dimensions.
AdaptedGrid build_adapted_grid(const ModeCurvature& curvature, const GridSpec& spec, Decomposition decomposition,
                               std::size_t point_budget = kDefaultPointBudget);

}  // namespace aghq

#include "aghq/adapt_pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aghq/errors.hpp"
#include "aghq/parallel.hpp"

namespace aghq {

namespace {

// Evaluates log p_LA at several theta from one warm start.
std::vector<double> evaluate_log_laplace(const LogJointModel& model, const std::vector<VectorXd>& thetas,
                                         const VectorXd& warm, const InnerOptions& inner, int threads) {
  std::vector<double> out(thetas.size());
  parallel_for(thetas.size(), threads, [&](std::size_t i) { out[i] = log_laplace(model, thetas[i], warm, inner).log_laplace; });
  return out;
}

VectorXd central_gradient(const LogJointModel& model, const VectorXd& theta, const VectorXd& warm,
                          const OuterOptions& options, int& evaluations) {
  const Eigen::Index m = theta.size();
  const StepRule rule = StepRule::cube_root();
  std::vector<VectorXd> points;
  for (Eigen::Index j = 0; j < m; ++j) {
    VectorXd up = theta, down = theta;
    up(j) += rule.step(theta(j));
    down(j) -= rule.step(theta(j));
    points.push_back(up);
    points.push_back(down);
  }
  const auto values = evaluate_log_laplace(model, points, warm, options.inner, options.threads);
  evaluations += static_cast<int>(points.size());
  VectorXd grad(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    // Gradient of the minimized objective -log p_LA.
    grad(j) = -(values[2 * jj] - values[2 * jj + 1]) / (2.0 * rule.step(theta(j)));
  }
  if (!grad.allFinite()) throw OptimizerError("outer_optimize: non-finite gradient");
  return grad;
}

std::string describe(int iter, double value, double gnorm, const VectorXd& theta) {
  std::ostringstream out;
  out.precision(10);
  out << "iter " << iter << " log_laplace=" << value << " |grad|=" << gnorm << " theta=[";
  for (Eigen::Index i = 0; i < theta.size(); ++i) out << (i ? " " : "") << theta(i);
  out << "]";
  return out.str();
}

}  // namespace

OuterResult outer_optimize(const LogJointModel& model, const VectorXd& theta0, const OuterOptions& options) {
  const Eigen::Index m = theta0.size();
  if (m != static_cast<Eigen::Index>(model.hyper_dim()))
    throw ConfigError("outer_optimize: theta0 has the wrong dimension");

  OuterResult result;
  VectorXd theta = theta0;
  InnerFit fit = log_laplace(model, theta, VectorXd(), options.inner);
  if (!std::isfinite(fit.log_laplace)) throw OptimizerError("outer_optimize: log_laplace not finite at theta0");
  double value = -fit.log_laplace;
  VectorXd warm = fit.x_hat;
  result.evaluations = 1;

  VectorXd grad = central_gradient(model, theta, warm, options, result.evaluations);

  // Seed the inverse Hessian from a finite-difference Hessian when possible.
  MatrixXd inv_hess = MatrixXd::Identity(m, m);
  {
    const MatrixXd h0 = -fd_hessian(
        [&](const VectorXd& t) { return log_laplace(model, t, warm, options.inner).log_laplace; }, theta,
        StepRule::fourth_root());
    result.evaluations += static_cast<int>(1 + 2 * m * m);
    Eigen::LLT<MatrixXd> llt(h0);
    if (h0.allFinite() && llt.info() == Eigen::Success) {
      inv_hess = llt.solve(MatrixXd::Identity(m, m));
    } else {
      inv_hess /= std::max(1.0, grad.cwiseAbs().maxCoeff());
    }
  }

  result.trace.push_back(describe(0, -value, grad.cwiseAbs().maxCoeff(), theta));

  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double gnorm = grad.cwiseAbs().maxCoeff();
    if (gnorm < options.gradient_tol) {
      converged = true;
      break;
    }

    VectorXd direction = -inv_hess * grad;
    if (!(grad.dot(direction) < 0.0)) {
      inv_hess = MatrixXd::Identity(m, m) / std::max(1.0, gnorm);
      direction = -inv_hess * grad;
    }
    const double longest = direction.cwiseAbs().maxCoeff();
    if (longest > options.max_step) direction *= options.max_step / longest;

    // Backtracking on the Armijo condition; stop once the trial step falls
    // below the step tolerance.
    double t = 1.0;
    bool accepted = false;
    bool step_converged = false;
    VectorXd candidate;
    InnerFit candidate_fit;
    for (int h = 0; h < 80; ++h, t *= 0.5) {
      if (t * direction.cwiseAbs().maxCoeff() < options.step_tol) {
        step_converged = true;
        break;
      }
      candidate = theta + t * direction;
      try {
        candidate_fit = log_laplace(model, candidate, warm, options.inner);
      } catch (const CurvatureError&) {
        continue;
      }
      ++result.evaluations;
      const double cv = -candidate_fit.log_laplace;
      if (std::isfinite(cv) && cv <= value + 1e-4 * t * grad.dot(direction)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (step_converged) {
        converged = true;
        result.trace.push_back("line search reached the step tolerance");
        break;
      }
      throw OptimizerError("outer_optimize: line search failed\n" + result.trace.back());
    }

    const VectorXd step = candidate - theta;
    theta = candidate;
    value = -candidate_fit.log_laplace;
    warm = candidate_fit.x_hat;
    const VectorXd new_grad = central_gradient(model, theta, warm, options, result.evaluations);
    const VectorXd diff = new_grad - grad;
    grad = new_grad;

    const double sy = step.dot(diff);
    if (sy > 1e-12 * step.norm() * diff.norm()) {
      const double rho = 1.0 / sy;
      const MatrixXd id = MatrixXd::Identity(m, m);
      inv_hess = (id - rho * step * diff.transpose()) * inv_hess * (id - rho * diff * step.transpose()) +
                 rho * step * step.transpose();
    }
    result.trace.push_back(describe(iter + 1, -value, grad.cwiseAbs().maxCoeff(), theta));

    if (step.cwiseAbs().maxCoeff() < options.step_tol) {
      converged = true;
      ++iter;
      break;
    }
  }

  if (!converged) {
    std::string trace;
    const std::size_t first = result.trace.size() > 10 ? result.trace.size() - 10 : 0;
    for (std::size_t i = first; i < result.trace.size(); ++i) trace += "\n  " + result.trace[i];
    throw OptimizerError("outer_optimize: no convergence after " + std::to_string(options.max_iterations) +
                         " iterations; last iterations:" + trace);
  }

  // Refresh the latent mode at the optimum from the final warm start.
  const InnerFit final_fit = log_laplace(model, theta, warm, options.inner);
  result.theta_hat = theta;
  result.x_hat = final_fit.x_hat;
  result.log_laplace = final_fit.log_laplace;
  result.gradient_norm = grad.cwiseAbs().maxCoeff();
  result.iterations = iter;
  return result;
}

std::string to_string(Decomposition d) { return d == Decomposition::Cholesky ? "cholesky" : "spectral"; }

Decomposition parse_decomposition(const std::string& text) {
  if (text == "cholesky") return Decomposition::Cholesky;
  if (text == "spectral") return Decomposition::Spectral;
  throw ConfigError("unknown decomposition '" + text + "' (expected cholesky or spectral)");
}

ModeCurvature make_mode_curvature(const VectorXd& theta_hat, const MatrixXd& curvature) {
  const Eigen::Index m = theta_hat.size();
  if (curvature.rows() != m || curvature.cols() != m)
    throw ConfigError("make_mode_curvature: curvature must be m x m");
  if (!curvature.allFinite()) throw CurvatureError("outer curvature has non-finite entries");

  ModeCurvature mc;
  mc.theta_hat = theta_hat;
  mc.curvature = 0.5 * (curvature + curvature.transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> curv_eig(mc.curvature, Eigen::EigenvaluesOnly);
  if (curv_eig.eigenvalues().minCoeff() <= 0.0) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "outer curvature is not positive definite (smallest eigenvalue " << curv_eig.eigenvalues().minCoeff()
        << "); check that the model's hyperparameters are identifiable";
    throw CurvatureError(msg.str());
  }

  Eigen::LLT<MatrixXd> llt(mc.curvature);
  if (llt.info() != Eigen::Success) throw CurvatureError("outer curvature could not be factorized");
  mc.inverse = llt.solve(MatrixXd::Identity(m, m));
  mc.inverse = 0.5 * (mc.inverse + mc.inverse.transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(mc.inverse);
  if (eig.info() != Eigen::Success) throw CurvatureError("eigendecomposition of the inverse curvature failed");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return eig.eigenvalues()(a) > eig.eigenvalues()(b); });

  mc.eigenvalues.resize(m);
  mc.eigenvectors.resize(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const Eigen::Index src = order[static_cast<std::size_t>(c)];
    mc.eigenvalues(c) = eig.eigenvalues()(src);
    VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    mc.eigenvectors.col(c) = v;
  }
  if (mc.eigenvalues.minCoeff() <= 0.0)
    throw CurvatureError("inverse curvature has a non-positive eigenvalue; check that the model's hyperparameters "
                         "are identifiable");

  Eigen::LLT<MatrixXd> inv_llt(mc.inverse);
  if (inv_llt.info() != Eigen::Success) throw CurvatureError("inverse curvature could not be factorized");
  mc.cholesky_factor = inv_llt.matrixL();
  return mc;
}

MatrixXd richardson_hessian(const ScalarFunction& f, const VectorXd& point, double base_step, int threads) {
  const Eigen::Index m = point.size();
  VectorXd h(m);
  for (Eigen::Index j = 0; j < m; ++j) h(j) = base_step * std::max(1.0, std::abs(point(j)));

  // Evaluation points for step scales 1 and 1/2, in a fixed order.
  std::vector<VectorXd> points{point};
  auto add = [&](Eigen::Index i, double si, Eigen::Index j, double sj, double scale) {
    VectorXd p = point;
    p(i) += si * scale * h(i);
    if (j >= 0) p(j) += sj * scale * h(j);
    points.push_back(std::move(p));
  };
  for (double scale : {1.0, 0.5}) {
    for (Eigen::Index i = 0; i < m; ++i) {
      add(i, 1, -1, 0, scale);
      add(i, -1, -1, 0, scale);
      for (Eigen::Index j = 0; j < i; ++j) {
        add(i, 1, j, 1, scale);
        add(i, 1, j, -1, scale);
        add(i, -1, j, 1, scale);
        add(i, -1, j, -1, scale);
      }
    }
  }

  std::vector<double> values(points.size());
  parallel_for(points.size(), threads, [&](std::size_t k) { values[k] = f(points[k]); });
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!std::isfinite(values[k])) throw Error("richardson_hessian: non-finite evaluation");

  const double center = values[0];
  std::size_t next = 1;
  MatrixXd estimates[2] = {MatrixXd(m, m), MatrixXd(m, m)};
  for (int s = 0; s < 2; ++s) {
    const double scale = s == 0 ? 1.0 : 0.5;
    MatrixXd& est = estimates[s];
    for (Eigen::Index i = 0; i < m; ++i) {
      const double hi = scale * h(i);
      const double up = values[next++];
      const double down = values[next++];
      est(i, i) = (up - 2.0 * center + down) / (hi * hi);
      for (Eigen::Index j = 0; j < i; ++j) {
        const double hj = scale * h(j);
        const double pp = values[next++];
        const double pm = values[next++];
        const double mp = values[next++];
        const double mm = values[next++];
        est(i, j) = est(j, i) = (pp - pm - mp + mm) / (4.0 * hi * hj);
      }
    }
  }
  const MatrixXd extrapolated = (4.0 * estimates[1] - estimates[0]) / 3.0;
  return 0.5 * (extrapolated + extrapolated.transpose());
}

ModeCurvature outer_curvature(const LogJointModel& model, const VectorXd& theta_hat, const VectorXd& x_hat,
                              const CurvatureOptions& options) {
  const MatrixXd hess = richardson_hessian(
      [&](const VectorXd& t) { return log_laplace(model, t, x_hat, options.inner).log_laplace; }, theta_hat,
      options.base_step, options.threads);
  return make_mode_curvature(theta_hat, -hess);
}

std::vector<double> cumulative_proportions(const ModeCurvature& curvature) {
  const double total = curvature.eigenvalues.sum();
  std::vector<double> out;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < curvature.eigenvalues.size(); ++j) {
    acc += curvature.eigenvalues(j);
    out.push_back(acc / total);
  }
  if (!out.empty()) out.back() = 1.0;
  return out;
}

PcaSelection select_rank(const ModeCurvature& curvature, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("select_rank: threshold must lie in (0, 1]");
  const auto cumulative = cumulative_proportions(curvature);
  for (std::size_t s = 0; s < cumulative.size(); ++s)
    if (cumulative[s] >= threshold - 1e-12) return PcaSelection{s + 1, cumulative[s], threshold};
  return PcaSelection{cumulative.size(), 1.0, threshold};
}

PcaSelection fixed_rank(const ModeCurvature& curvature, std::size_t s) {
  if (s < 1 || s > curvature.dim())
    throw ConfigError("retained rank s must lie in [1, " + std::to_string(curvature.dim()) + "]");
  return PcaSelection{s, cumulative_proportions(curvature)[s - 1], 0.0};
}

AdaptedGrid build_adapted_grid(const ModeCurvature& curvature, const GridSpec& spec, Decomposition decomposition,
                               std::size_t point_budget) {
  const Eigen::Index m = curvature.theta_hat.size();
  if (static_cast<Eigen::Index>(spec.dim()) != m)
    throw ConfigError("build_adapted_grid: grid has " + std::to_string(spec.dim()) + " dimensions, model has " +
                      std::to_string(m));
  if (decomposition == Decomposition::Cholesky && !spec.is_uniform())
    throw ConfigError("build_adapted_grid: variable levels require the spectral decomposition");

  AdaptedGrid grid;
  grid.base = product_grid(spec, point_budget);
  grid.decomposition = decomposition;
  grid.center = curvature.theta_hat;

  if (decomposition == Decomposition::Cholesky) {
    grid.transform = curvature.cholesky_factor;
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) log_det += std::log(curvature.cholesky_factor(i, i));
    grid.log_abs_det_transform = log_det;
  } else {
    grid.transform = curvature.eigenvectors * curvature.eigenvalues.cwiseSqrt().asDiagonal();
    grid.log_abs_det_transform = 0.5 * curvature.eigenvalues.array().log().sum();
  }

  grid.theta_points = grid.base.points * grid.transform.transpose();
  grid.theta_points.rowwise() += grid.center.transpose();
  return grid;
}

}  // namespace aghq

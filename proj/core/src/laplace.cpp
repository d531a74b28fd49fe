#include "aghq/laplace.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "aghq/errors.hpp"

namespace aghq {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::string format_theta(const VectorXd& theta) {
  std::ostringstream out;
  out.precision(17);
  out << "(";
  for (Eigen::Index i = 0; i < theta.size(); ++i) out << (i ? ", " : "") << theta(i);
  out << ")";
  return out.str();
}

}  // namespace

InnerMode inner_mode(const LogJointModel& model, const VectorXd& theta, const VectorXd& x0,
                     const InnerOptions& options) {
  const auto n = static_cast<Eigen::Index>(model.latent_dim());
  InnerMode result;
  result.x_hat = x0.size() == n ? x0 : VectorXd::Zero(n);
  if (n == 0) {
    result.log_joint = model.log_joint(result.x_hat, theta);
    result.converged = true;
    return result;
  }

  VectorXd& x = result.x_hat;
  double f = model.log_joint(x, theta);
  if (!std::isfinite(f)) throw Error("inner_mode: log_joint is not finite at the starting point for theta " +
                                     format_theta(theta));
  VectorXd g = model.latent_gradient(x, theta);

  for (int it = 0; it < options.max_iterations; ++it) {
    const double gnorm = g.cwiseAbs().maxCoeff();
    if (gnorm < options.gradient_tol) {
      result.converged = true;
      break;
    }

    VectorXd direction;
    Eigen::LLT<MatrixXd> llt(model.latent_hessian(x, theta));
    if (llt.info() == Eigen::Success) {
      direction = llt.solve(g);
    } else {
      direction = g / std::max(1.0, gnorm);
    }
    const double slope = g.dot(direction);

    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      const VectorXd candidate = x + t * direction;
      const double fc = model.log_joint(candidate, theta);
      if (!std::isfinite(fc)) continue;
      bool ok = fc >= f + options.armijo * t * slope;
      VectorXd gc;
      if (!ok && h == 0) {
        // Near the optimum the change in f drops below rounding noise; accept
        // the full step if it still reduces the gradient.
        const double noise = 1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
        if (std::abs(fc - f) <= noise) {
          gc = model.latent_gradient(candidate, theta);
          ok = gc.cwiseAbs().maxCoeff() < gnorm;
        }
      }
      if (ok) {
        x = candidate;
        f = fc;
        g = gc.size() == n ? gc : model.latent_gradient(x, theta);
        accepted = true;
        break;
      }
    }
    result.iterations = it + 1;
    if (!accepted) break;
  }

  result.log_joint = f;
  result.gradient_norm = g.cwiseAbs().maxCoeff();
  if (!result.converged && result.gradient_norm < options.gradient_tol) result.converged = true;
  return result;
}

InnerFit log_laplace(const LogJointModel& model, const VectorXd& theta, const VectorXd& warm_start,
                     const InnerOptions& options) {
  InnerFit fit;
  fit.theta = theta;
  const auto n = static_cast<Eigen::Index>(model.latent_dim());
  if (n == 0) {
    fit.x_hat = VectorXd(0);
    fit.hessian_factor = MatrixXd(0, 0);
    fit.log_joint_at_mode = model.log_joint(fit.x_hat, theta);
    fit.log_laplace = fit.log_joint_at_mode;
    return fit;
  }

  InnerMode mode = inner_mode(model, theta, warm_start, options);
  fit.x_hat = std::move(mode.x_hat);
  fit.iterations = mode.iterations;
  fit.converged = mode.converged;
  fit.gradient_norm = mode.gradient_norm;
  fit.log_joint_at_mode = mode.log_joint;

  Eigen::LLT<MatrixXd> llt(model.latent_hessian(fit.x_hat, theta));
  if (llt.info() != Eigen::Success)
    throw CurvatureError("log_laplace: latent curvature is not positive definite at theta " + format_theta(theta));
  fit.hessian_factor = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(fit.hessian_factor(i, i));
  fit.log_det_hessian = 2.0 * log_det;
  fit.log_laplace = fit.log_joint_at_mode + 0.5 * static_cast<double>(n) * kLog2Pi - 0.5 * fit.log_det_hessian;
  if (!std::isfinite(fit.log_laplace))
    throw Error("log_laplace: non-finite value at theta " + format_theta(theta));
  return fit;
}

}  // namespace aghq

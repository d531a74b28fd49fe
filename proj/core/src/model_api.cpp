#include "aghq/model_api.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "aghq/errors.hpp"

namespace aghq {

void ParameterSpace::add_latent_block(const std::string& name, std::size_t size) {
  LatentBlock block{name, latent_names.size(), latent_names.size() + size};
  if (size == 1) {
    latent_names.push_back(name);
  } else {
    for (std::size_t i = 0; i < size; ++i)
      latent_names.push_back(name + "[" + std::to_string(i + 1) + "]");
  }
  latent_blocks.push_back(std::move(block));
}

void ParameterSpace::validate() const {
  if (hyper_names.empty()) throw ConfigError("ParameterSpace: at least one hyperparameter required");
  std::set<std::string> seen;
  for (const auto& n : latent_names)
    if (!seen.insert(n).second) throw ConfigError("ParameterSpace: duplicate name " + n);
  for (const auto& n : hyper_names)
    if (!seen.insert(n).second) throw ConfigError("ParameterSpace: duplicate name " + n);
  std::size_t next = 0;
  for (const auto& b : latent_blocks) {
    if (b.begin != next || b.end <= b.begin)
      throw ConfigError("ParameterSpace: blocks do not partition the latent field at " + b.name);
    next = b.end;
  }
  if (next != latent_names.size())
    throw ConfigError("ParameterSpace: blocks do not cover the latent field");
}

VectorXd LogJointModel::latent_gradient(const VectorXd& x, const VectorXd& theta) const {
  return fd_gradient([&](const VectorXd& xx) { return log_joint(xx, theta); }, x);
}

MatrixXd LogJointModel::latent_hessian(const VectorXd& x, const VectorXd& theta) const {
  return -fd_hessian([&](const VectorXd& xx) { return log_joint(xx, theta); }, x);
}

VectorXd LogJointModel::output_map(const VectorXd&, const VectorXd&) const {
  return VectorXd(0);
}

double StepRule::step(double x) const { return scale * std::max(1.0, std::abs(x)); }

namespace {

double checked(double value, Eigen::Index coord) {
  if (!std::isfinite(value))
    throw Error("finite difference: non-finite evaluation while perturbing coordinate " +
                std::to_string(coord));
  return value;
}

}  // namespace

VectorXd fd_gradient(const ScalarFunction& f, const VectorXd& point, StepRule rule) {
  const Eigen::Index d = point.size();
  VectorXd grad(d);
  VectorXd work = point;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = rule.step(point(j));
    work(j) = point(j) + h;
    const double up = checked(f(work), j);
    work(j) = point(j) - h;
    const double down = checked(f(work), j);
    work(j) = point(j);
    grad(j) = (up - down) / (2.0 * h);
  }
  return grad;
}

MatrixXd fd_hessian(const ScalarFunction& f, const VectorXd& point, StepRule rule) {
  const Eigen::Index d = point.size();
  MatrixXd hess(d, d);
  VectorXd work = point;
  const double center = checked(f(point), -1);
  VectorXd h(d);
  for (Eigen::Index j = 0; j < d; ++j) h(j) = rule.step(point(j));

  for (Eigen::Index i = 0; i < d; ++i) {
    work(i) = point(i) + h(i);
    const double up = checked(f(work), i);
    work(i) = point(i) - h(i);
    const double down = checked(f(work), i);
    work(i) = point(i);
    hess(i, i) = (up - 2.0 * center + down) / (h(i) * h(i));

    for (Eigen::Index j = 0; j < i; ++j) {
      auto eval = [&](double si, double sj) {
        work(i) = point(i) + si * h(i);
        work(j) = point(j) + sj * h(j);
        const double v = checked(f(work), i);
        work(i) = point(i);
        work(j) = point(j);
        return v;
      };
      const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) /
                       (4.0 * h(i) * h(j));
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return 0.5 * (hess + hess.transpose());
}

MatrixXd fd_jacobian(const VectorFunction& g, const VectorXd& point, StepRule rule) {
  const Eigen::Index d = point.size();
  MatrixXd jac;
  VectorXd work = point;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = rule.step(point(j));
    work(j) = point(j) + h;
    const VectorXd up = g(work);
    work(j) = point(j) - h;
    const VectorXd down = g(work);
    work(j) = point(j);
    if (j == 0) jac.resize(up.size(), d);
    if (!up.allFinite() || !down.allFinite())
      throw Error("finite difference: non-finite evaluation while perturbing coordinate " +
                  std::to_string(j));
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

void EvaluationBudget::validate() const {
  if (max_log_joint_calls == 0) throw ConfigError("EvaluationBudget: max_log_joint_calls must be positive");
  if (wall_clock_hint_seconds < 0.0)
    throw ConfigError("EvaluationBudget: wall-clock hint must be non-negative");
}

BudgetedModel::BudgetedModel(const LogJointModel& inner, EvaluationBudget budget)
    : inner_(inner), budget_(budget) {
  budget_.validate();
}

double BudgetedModel::log_joint(const VectorXd& x, const VectorXd& theta) const {
  if (calls_.fetch_add(1) >= budget_.max_log_joint_calls)
    throw OptimizerError("evaluation budget of " + std::to_string(budget_.max_log_joint_calls) +
                         " log_joint calls exhausted");
  return inner_.log_joint(x, theta);
}

ValidationReport validate_model(const LogJointModel& model, int n_points, std::uint64_t seed,
                                double tolerance) {
  const auto& space = model.space();
  const auto n = static_cast<Eigen::Index>(space.latent_dim());
  const auto m = static_cast<Eigen::Index>(space.hyper_dim());

  ValidationReport report;
  report.tolerance = tolerance;
  for (const auto& b : space.latent_blocks) report.blocks.push_back(BlockCheck{b.name});
  if (n == 0) return report;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);

  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };

  for (int p = 0; p < n_points; ++p) {
    VectorXd x(n), theta(m);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = normal(rng);
    for (Eigen::Index i = 0; i < m; ++i) theta(i) = normal(rng);

    const VectorXd grad = model.latent_gradient(x, theta);
    const VectorXd grad_fd = fd_gradient([&](const VectorXd& xx) { return model.log_joint(xx, theta); }, x);
    const MatrixXd hess = model.latent_hessian(x, theta);
    const MatrixXd hess_fd =
        -fd_jacobian([&](const VectorXd& xx) { return model.latent_gradient(xx, theta); }, x);

    report.max_asymmetry = std::max(report.max_asymmetry, (hess - hess.transpose()).cwiseAbs().maxCoeff());

    for (std::size_t b = 0; b < space.latent_blocks.size(); ++b) {
      const auto& block = space.latent_blocks[b];
      auto& check = report.blocks[b];
      for (std::size_t i = block.begin; i < block.end; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        check.gradient_error = std::max(check.gradient_error, rel(grad(ii), grad_fd(ii)));
        for (Eigen::Index j = 0; j < n; ++j)
          check.hessian_error = std::max(check.hessian_error, rel(hess(ii, j), hess_fd(ii, j)));
      }
    }
  }

  for (auto& check : report.blocks) {
    check.passed = check.gradient_error <= tolerance && check.hessian_error <= tolerance;
    report.max_gradient_error = std::max(report.max_gradient_error, check.gradient_error);
    report.max_hessian_error = std::max(report.max_hessian_error, check.hessian_error);
    report.passed = report.passed && check.passed;
  }
  report.passed = report.passed && report.max_asymmetry <= tolerance;
  return report;
}

}  // namespace aghq

#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aghq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// A named contiguous range [begin, end) of latent indices.
struct LatentBlock {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
};

// Partition of the parameter vector into a latent field x and
// hyperparameters theta.
struct ParameterSpace {
  std::vector<std::string> latent_names;
  std::vector<std::string> hyper_names;
  std::vector<LatentBlock> latent_blocks;

  std::size_t latent_dim() const { return latent_names.size(); }
  std::size_t hyper_dim() const { return hyper_names.size(); }

  // Appends a block of `size` latent entries named name[1..size], or just
  // `name` when size == 1.
  void add_latent_block(const std::string& name, std::size_t size);

  // Names unique, blocks partition [0, N), at least one hyperparameter.
  void validate() const;
};

/// Evaluation contract for a target log p(y, x, theta).
///
/// Implementations must be safe to evaluate concurrently from several
/// threads. Only latent-field derivatives are required; the outer loop
/// differentiates over theta numerically. The defaults for the derivative
/// methods fall back to central finite differences.
class LogJointModel {
 public:
  virtual ~LogJointModel() = default;

  virtual std::string name() const = 0;
  virtual const ParameterSpace& space() const = 0;

  virtual double log_joint(const VectorXd& x, const VectorXd& theta) const = 0;

  // d log p / dx
  virtual VectorXd latent_gradient(const VectorXd& x, const VectorXd& theta) const;

  // -d^2 log p / dx dx^T (symmetric)
  virtual MatrixXd latent_hessian(const VectorXd& x, const VectorXd& theta) const;

  // Derived quantities (e.g. prevalence per area) computed per draw.
  virtual std::vector<std::string> output_names() const { return {}; }
  virtual VectorXd output_map(const VectorXd& x, const VectorXd& theta) const;

  std::size_t latent_dim() const { return space().latent_dim(); }
  std::size_t hyper_dim() const { return space().hyper_dim(); }
};

// Per-coordinate step h_j = scale * max(1, |x_j|).
struct StepRule {
  double scale = std::cbrt(std::numeric_limits<double>::epsilon());

  double step(double x) const;
  static StepRule cube_root() { return {}; }
  static StepRule fourth_root() { return {std::pow(std::numeric_limits<double>::epsilon(), 0.25)}; }
};

using ScalarFunction = std::function<double(const VectorXd&)>;
using VectorFunction = std::function<VectorXd(const VectorXd&)>;

// Central-difference gradient. Throws Error naming the coordinate when an
// evaluation is non-finite.
VectorXd fd_gradient(const ScalarFunction& f, const VectorXd& point, StepRule rule = {});

// Central second differences, symmetrized as (H + H^T) / 2. This is the
// Hessian of f itself (no sign flip). The default step balances roundoff
// against truncation for a second difference.
MatrixXd fd_hessian(const ScalarFunction& f, const VectorXd& point, StepRule rule = StepRule::fourth_root());

// Central-difference Jacobian of a vector function; column j holds d g / d x_j.
MatrixXd fd_jacobian(const VectorFunction& g, const VectorXd& point, StepRule rule = {});

struct EvaluationBudget {
  std::size_t max_log_joint_calls = 50'000'000;
  double wall_clock_hint_seconds = 0.0;  // 0 means no hint

  void validate() const;
};

// Decorator that counts log_joint calls against a budget and throws
// OptimizerError once it is exhausted.
class BudgetedModel final : public LogJointModel {
 public:
  BudgetedModel(const LogJointModel& inner, EvaluationBudget budget);

  std::string name() const override { return inner_.name(); }
  const ParameterSpace& space() const override { return inner_.space(); }
  double log_joint(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd latent_gradient(const VectorXd& x, const VectorXd& theta) const override {
    return inner_.latent_gradient(x, theta);
  }
  MatrixXd latent_hessian(const VectorXd& x, const VectorXd& theta) const override {
    return inner_.latent_hessian(x, theta);
  }
  std::vector<std::string> output_names() const override { return inner_.output_names(); }
  VectorXd output_map(const VectorXd& x, const VectorXd& theta) const override {
    return inner_.output_map(x, theta);
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  const LogJointModel& inner_;
  EvaluationBudget budget_;
  mutable std::atomic<std::size_t> calls_{0};
};

struct BlockCheck {
  std::string block;
  double gradient_error = 0.0;  // max relative error over points and entries
  double hessian_error = 0.0;
  bool passed = true;
};

struct ValidationReport {
  double tolerance = 1e-4;
  std::vector<BlockCheck> blocks;
  double max_gradient_error = 0.0;
  double max_hessian_error = 0.0;
  double max_asymmetry = 0.0;
  bool passed = true;
};

/// Compares the analytic latent gradient with finite differences of
/// log_joint, and the analytic latent Hessian with the negative finite
/// difference Jacobian of the analytic gradient, at `n_points` random
/// (x, theta). Disagreement is reported, never thrown. The relative error of
/// an entry is |a - b| / max(1, |b|).
ValidationReport validate_model(const LogJointModel& model, int n_points, std::uint64_t seed,
                                double tolerance = 1e-4);

}  // namespace aghq

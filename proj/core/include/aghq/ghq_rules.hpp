#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace aghq {

inline constexpr int kMaxRuleLevel = 25;
inline constexpr std::size_t kDefaultPointBudget = 1'000'000;

// Probabilists' Hermite polynomial He_k(z) by the three-term recurrence.
double hermite_eval(int k, double z);

/// A k-point Gauss-Hermite rule. Weights are taken with respect to Lebesgue
/// measure after dividing out the standard Gaussian density, so that
/// sum_i weights[i] * phi(nodes[i]) * f(nodes[i]) approximates E[f(Z)].
struct UnivariateRule {
  int level = 0;
  std::vector<double> nodes;    // ascending
  std::vector<double> weights;  // positive, symmetric
  std::vector<double> log_weights;
};

/// Builds the rule from the Jacobi matrix eigenvalues, one Newton polish on
/// He_k, and the closed form w(z) = k! / (He_{k+1}(z)^2 phi(z)) evaluated in
/// log space. Throws ConfigError for k outside [1, 25].
UnivariateRule univariate_rule(int k);

struct GridSpec {
  std::vector<int> levels;

  std::size_t dim() const { return levels.size(); }
  // Product of levels; saturates at SIZE_MAX instead of overflowing.
  std::size_t point_count() const;
  void validate() const;

  static GridSpec uniform(std::size_t dim, int k);
  // (k, ..., k, 1, ..., 1) with `retained` leading entries equal to k.
  static GridSpec pca(std::size_t dim, std::size_t retained, int k);
  bool is_uniform() const;
};

struct QuadratureGrid {
  std::size_t dim = 0;
  std::vector<int> levels;
  Eigen::MatrixXd points;  // (#points x dim), z-space
  std::vector<double> weights;
  std::vector<double> log_weights;

  std::size_t size() const { return weights.size(); }
};

/// Cartesian product of univariate rules, enumerated lexicographically with
/// the first dimension varying slowest. Throws ConfigError when the point
/// count exceeds `point_budget`.
QuadratureGrid product_grid(const GridSpec& spec,
                            std::size_t point_budget = kDefaultPointBudget);

// Reads AGHQ_POINT_BUDGET, falling back to kDefaultPointBudget.
std::size_t point_budget_from_env();

}  // namespace aghq

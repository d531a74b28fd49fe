#include "aghq/ghq_rules.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "aghq/errors.hpp"

namespace aghq {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Returns (He_k(z), He_{k-1}(z)).
std::pair<double, double> hermite_pair(int k, double z) {
  double prev = 1.0;  // He_0
  if (k == 0) return {prev, 0.0};
  double cur = z;  // He_1
  for (int j = 1; j < k; ++j) {
    const double next = z * cur - j * prev;
    prev = cur;
    cur = next;
  }
  return {cur, prev};
}

}  // namespace

double hermite_eval(int k, double z) {
  if (k < 0) throw ConfigError("hermite_eval: negative degree");
  return hermite_pair(k, z).first;
}

UnivariateRule univariate_rule(int k) {
  if (k < 1 || k > kMaxRuleLevel)
    throw ConfigError("univariate_rule: level must lie in [1, " +
                      std::to_string(kMaxRuleLevel) + "], got " + std::to_string(k));

  // Golub-Welsch: the Jacobi matrix of the monic recurrence
  // He_{j+1} = z He_j - j He_{j-1} has zero diagonal and sqrt(j) off-diagonal.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd sub(std::max(k - 1, 0));
  for (int j = 1; j < k; ++j) sub(j - 1) = std::sqrt(static_cast<double>(j));

  std::vector<double> nodes(k, 0.0);
  if (k > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
      throw Error("univariate_rule: tridiagonal eigensolver failed");
    for (int i = 0; i < k; ++i) nodes[i] = solver.eigenvalues()(i);
  }

  // One Newton step on He_k, then a convergence check on the step size.
  // |He_k(z)| itself cannot reach 1e-12 for k beyond ~6 because He_k' grows
  // like z^(k-1); the relative Newton step is the scale-free residual.
  for (int i = 0; i < k; ++i) {
    double z = nodes[i];
    auto [hk, hkm1] = hermite_pair(k, z);
    const double deriv = k * hkm1;
    z -= hk / deriv;
    auto [hk2, hkm12] = hermite_pair(k, z);
    const double step = std::abs(hk2 / (k * hkm12));
    if (!std::isfinite(z) || step > 1e-12 * std::max(1.0, std::abs(z)))
      throw Error("univariate_rule: root polish did not converge for level " +
                  std::to_string(k));
    nodes[i] = z;
  }

  // Enforce exact symmetry.
  for (int i = 0; i < k / 2; ++i) {
    const double a = 0.5 * (std::abs(nodes[i]) + std::abs(nodes[k - 1 - i]));
    nodes[i] = -a;
    nodes[k - 1 - i] = a;
  }
  if (k % 2 == 1) nodes[k / 2] = 0.0;

  UnivariateRule rule;
  rule.level = k;
  rule.nodes = nodes;
  rule.log_weights.resize(k);
  const double log_kfact = std::lgamma(static_cast<double>(k) + 1.0);
  for (int i = 0; i < k; ++i) {
    const double z = nodes[i];
    const double hk1 = hermite_pair(k + 1, z).first;
    // log w = log k! - 2 log|He_{k+1}(z)| - log phi(z)
    rule.log_weights[i] = log_kfact - 2.0 * std::log(std::abs(hk1)) + 0.5 * z * z + kLogSqrt2Pi;
  }
  for (int i = 0; i < k / 2; ++i) {
    const double a = 0.5 * (rule.log_weights[i] + rule.log_weights[k - 1 - i]);
    rule.log_weights[i] = a;
    rule.log_weights[k - 1 - i] = a;
  }
  rule.weights.resize(k);
  for (int i = 0; i < k; ++i) rule.weights[i] = std::exp(rule.log_weights[i]);
  return rule;
}

std::size_t GridSpec::point_count() const {
  std::size_t count = 1;
  for (int k : levels) {
    const auto kk = static_cast<std::size_t>(std::max(k, 0));
    if (kk != 0 && count > std::numeric_limits<std::size_t>::max() / kk)
      return std::numeric_limits<std::size_t>::max();
    count *= kk;
  }
  return count;
}

void GridSpec::validate() const {
  if (levels.empty()) throw ConfigError("GridSpec: at least one dimension required");
  for (int k : levels)
    if (k < 1 || k > kMaxRuleLevel)
      throw ConfigError("GridSpec: every level must lie in [1, " +
                        std::to_string(kMaxRuleLevel) + "], got " + std::to_string(k));
}

GridSpec GridSpec::uniform(std::size_t dim, int k) {
  return GridSpec{std::vector<int>(dim, k)};
}

GridSpec GridSpec::pca(std::size_t dim, std::size_t retained, int k) {
  if (retained > dim)
    throw ConfigError("GridSpec::pca: retained rank " + std::to_string(retained) +
                      " exceeds dimension " + std::to_string(dim));
  GridSpec spec{std::vector<int>(dim, 1)};
  for (std::size_t j = 0; j < retained; ++j) spec.levels[j] = k;
  return spec;
}

bool GridSpec::is_uniform() const {
  for (int k : levels)
    if (k != levels.front()) return false;
  return true;
}

QuadratureGrid product_grid(const GridSpec& spec, std::size_t point_budget) {
  spec.validate();
  const std::size_t count = spec.point_count();
  if (count > point_budget)
    throw ConfigError("product_grid: " + std::to_string(count) +
                      " points exceed the point budget of " + std::to_string(point_budget));

  const std::size_t dim = spec.dim();
  std::vector<UnivariateRule> rules;
  rules.reserve(dim);
  for (int k : spec.levels) rules.push_back(univariate_rule(k));

  QuadratureGrid grid;
  grid.dim = dim;
  grid.levels = spec.levels;
  grid.points.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  grid.weights.resize(count);
  grid.log_weights.resize(count);

  std::vector<int> index(dim, 0);
  for (std::size_t p = 0; p < count; ++p) {
    double log_w = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      grid.points(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) =
          rules[j].nodes[index[j]];
      log_w += rules[j].log_weights[index[j]];
    }
    grid.log_weights[p] = log_w;
    grid.weights[p] = std::exp(log_w);

    // Odometer increment: last dimension fastest.
    for (std::size_t j = dim; j-- > 0;) {
      if (++index[j] < spec.levels[j]) break;
      index[j] = 0;
    }
  }
  return grid;
}

std::size_t point_budget_from_env() {
  const char* raw = std::getenv("AGHQ_POINT_BUDGET");
  if (raw == nullptr || *raw == '\0') return kDefaultPointBudget;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0' || value == 0)
    throw ConfigError(std::string("AGHQ_POINT_BUDGET is not a positive integer: ") + raw);
  return static_cast<std::size_t>(value);
}

}  // namespace aghq

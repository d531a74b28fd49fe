#include "aghq/model_library.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "aghq/errors.hpp"

namespace aghq {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
}

std::string to_string(PrecisionKind kind) {
  switch (kind) {
    case PrecisionKind::IID: return "IID";
    case PrecisionKind::AR1: return "AR1";
    case PrecisionKind::ICAR: return "ICAR";
    case PrecisionKind::BYM2: return "BYM2";
  }
  return "?";
}

Adjacency Adjacency::from_edges(std::size_t n,
                                const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Adjacency adj;
  adj.n = n;
  for (auto [a, b] : edges) {
    if (a >= n || b >= n)
      throw ConfigError("Adjacency: edge (" + std::to_string(a) + "," + std::to_string(b) +
                        ") out of range for " + std::to_string(n) + " nodes");
    if (a == b) throw ConfigError("Adjacency: self-loop at node " + std::to_string(a));
    adj.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(adj.edges.begin(), adj.edges.end());
  adj.edges.erase(std::unique(adj.edges.begin(), adj.edges.end()), adj.edges.end());
  return adj;
}

Adjacency Adjacency::grid(std::size_t rows, std::size_t cols) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(i, i + 1);
      if (r + 1 < rows) edges.emplace_back(i, i + cols);
    }
  return from_edges(rows * cols, edges);
}

std::vector<std::size_t> Adjacency::degrees() const {
  std::vector<std::size_t> deg(n, 0);
  for (auto [a, b] : edges) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

std::vector<std::size_t> Adjacency::components() const {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (auto [a, b] : edges) parent[find(a)] = find(b);

  std::vector<std::size_t> label(n);
  std::vector<std::size_t> root_label(n, n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (root_label[r] == n) root_label[r] = next++;
    label[i] = root_label[r];
  }
  return label;
}

std::size_t Adjacency::component_count() const {
  const auto labels = components();
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

PrecisionStructure precision_iid(std::size_t n, double sigma) {
  if (n == 0) throw ConfigError("precision_iid: size must be positive");
  if (!(sigma > 0.0)) throw ConfigError("precision_iid: sigma must be positive");
  PrecisionStructure q;
  q.kind = PrecisionKind::IID;
  q.size = n;
  q.sigma = sigma;
  q.matrix = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) /
             (sigma * sigma);
  return q;
}

PrecisionStructure precision_ar1(std::size_t n, double sigma, double phi) {
  if (n < 2) throw ConfigError("precision_ar1: size must be at least 2");
  if (!(sigma > 0.0)) throw ConfigError("precision_ar1: sigma must be positive");
  if (!(std::abs(phi) < 1.0)) throw ConfigError("precision_ar1: |phi| must be below 1");

  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nn, nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    m(i, i) = (i == 0 || i == nn - 1) ? 1.0 : 1.0 + phi * phi;
    if (i + 1 < nn) m(i, i + 1) = m(i + 1, i) = -phi;
  }
  PrecisionStructure q;
  q.kind = PrecisionKind::AR1;
  q.size = n;
  q.sigma = sigma;
  q.phi = phi;
  q.matrix = m / (sigma * sigma * (1.0 - phi * phi));
  return q;
}

Eigen::MatrixXd constrained_generalized_inverse(const Eigen::MatrixXd& laplacian) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian);
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(1.0, values.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values(i) > cutoff) inv(i) = 1.0 / values(i);
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

PrecisionStructure precision_icar(const Adjacency& adj, bool scale) {
  if (adj.edges.empty()) throw ConfigError("precision_icar: adjacency has no edges");
  const auto n = static_cast<Eigen::Index>(adj.n);
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (auto [a, b] : adj.edges) {
    const auto i = static_cast<Eigen::Index>(a);
    const auto j = static_cast<Eigen::Index>(b);
    lap(i, j) -= 1.0;
    lap(j, i) -= 1.0;
    lap(i, i) += 1.0;
    lap(j, j) += 1.0;
  }

  PrecisionStructure q;
  q.kind = PrecisionKind::ICAR;
  q.size = adj.n;
  q.rank_deficiency = static_cast<int>(adj.component_count());

  if (scale) {
    for (std::size_t d : adj.degrees())
      if (d == 0) throw ConfigError("precision_icar: cannot scale a graph with isolated nodes");
    const Eigen::MatrixXd ginv = constrained_generalized_inverse(lap);
    double log_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_sum += std::log(ginv(i, i));
    const double geo_mean = std::exp(log_sum / static_cast<double>(n));
    lap *= geo_mean;
  }
  q.matrix = lap;
  return q;
}

Eigen::VectorXd bym2_effect(const Eigen::VectorXd& v, const Eigen::VectorXd& w, double sigma, double phi) {
  if (v.size() != w.size()) throw ConfigError("bym2_effect: component sizes differ");
  if (!(sigma > 0.0)) throw ConfigError("bym2_effect: sigma must be positive");
  if (!(phi >= 0.0 && phi <= 1.0)) throw ConfigError("bym2_effect: phi must lie in [0, 1]");
  return sigma * (std::sqrt(1.0 - phi) * v + std::sqrt(phi) * w);
}

double kish_ess(const std::vector<double>& weights) {
  double sum = 0.0, sum_sq = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("kish_ess: negative weight");
    sum += w;
    sum_sq += w * w;
  }
  if (!(sum > 0.0)) throw ConfigError("kish_ess: weights are all zero");
  return sum * sum / sum_sq;
}

double weighted_mean(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.size() != weights.size()) throw ConfigError("weighted_mean: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += weights[i] * values[i];
    den += weights[i];
  }
  if (den == 0.0) throw ConfigError("weighted_mean: zero total weight");
  return num / den;
}

double xbin_log_density(double y, double m, double p) {
  if (!(y >= 0.0) || !(m >= 0.0)) throw ConfigError("xbin_log_density: counts must be non-negative");
  if (y > m) throw ConfigError("xbin_log_density: y exceeds m");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("xbin_log_density: p must lie strictly in (0, 1)");
  return std::lgamma(m + 1.0) - std::lgamma(y + 1.0) - std::lgamma(m - y + 1.0) + y * std::log(p) +
         (m - y) * std::log1p(-p);
}

double kappa_recent(double rate, double prevalence, double window_years, double false_recent) {
  if (rate < 0.0) throw ConfigError("kappa_recent: incidence rate must be non-negative");
  if (!(prevalence > 0.0 && prevalence < 1.0))
    throw ConfigError("kappa_recent: prevalence must lie strictly in (0, 1)");
  if (!(window_years >= false_recent && false_recent >= 0.0))
    throw ConfigError("kappa_recent: need window >= false-recent proportion >= 0");
  // The trailing false_recent term sits outside the product, as printed.
  return 1.0 - std::exp(-rate * ((1.0 - prevalence) / prevalence) * (window_years - false_recent) -
                        false_recent);
}

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double std_normal_log_cdf(double z) {
  if (z > -35.0) return std::log(0.5 * std::erfc(-z / std::sqrt(2.0)));
  // Asymptotic tail expansion.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - kLogSqrt2Pi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

double skewnormal_log_pdf(double z, double alpha) {
  return std::log(2.0) + normal_log_pdf(z, 0.0, 1.0) + std_normal_log_cdf(alpha * z);
}

double skewnormal_pdf(double z, double alpha) { return std::exp(skewnormal_log_pdf(z, alpha)); }

double fig2_log_integrand(double theta1, double theta2) {
  return skewnormal_log_pdf(0.5 * theta1, 2.0) + skewnormal_log_pdf(0.8 * theta1 - 0.5 * theta2, -2.0);
}

double fig2_integrand(double theta1, double theta2) { return std::exp(fig2_log_integrand(theta1, theta2)); }

}  // namespace aghq

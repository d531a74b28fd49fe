#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace aghq {

enum class PrecisionKind { IID, AR1, ICAR, BYM2 };

std::string to_string(PrecisionKind kind);

struct PrecisionStructure {
  PrecisionKind kind = PrecisionKind::IID;
  std::size_t size = 0;
  double sigma = 1.0;
  double phi = 0.0;
  Eigen::MatrixXd matrix;
  int rank_deficiency = 0;
};

// Undirected graph on nodes 0..n-1 with a deduplicated edge list (a < b).
struct Adjacency {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  // Rejects self-loops and out-of-range nodes; stores each edge once.
  static Adjacency from_edges(std::size_t n,
                              const std::vector<std::pair<std::size_t, std::size_t>>& edges);
  // Rook adjacency on a rows x cols lattice, row-major numbering.
  static Adjacency grid(std::size_t rows, std::size_t cols);

  std::vector<std::size_t> degrees() const;
  // Component label for every node.
  std::vector<std::size_t> components() const;
  std::size_t component_count() const;
};

PrecisionStructure precision_iid(std::size_t n, double sigma);

// Stationary AR1 with marginal variance sigma^2.
PrecisionStructure precision_ar1(std::size_t n, double sigma, double phi);

// Graph Laplacian. With `scale`, multiplied by the geometric mean of the
// marginal variances of its sum-to-zero generalized inverse, so that the
// scaled structure has typical marginal variance 1.
PrecisionStructure precision_icar(const Adjacency& adj, bool scale);

// Generalized inverse of a Laplacian under per-component sum-to-zero
// constraints (Moore-Penrose pseudo-inverse).
Eigen::MatrixXd constrained_generalized_inverse(const Eigen::MatrixXd& laplacian);

// sigma * (sqrt(1 - phi) v + sqrt(phi) w)
Eigen::VectorXd bym2_effect(const Eigen::VectorXd& v, const Eigen::VectorXd& w, double sigma, double phi);

// (sum w)^2 / sum w^2
double kish_ess(const std::vector<double>& weights);

double weighted_mean(const std::vector<double>& values, const std::vector<double>& weights);

// Binomial log-density extended to real y <= m through log-gamma.
double xbin_log_density(double y, double m, double p);

// Probability of being recently infected given incidence `rate` (per year),
// prevalence `prevalence`, mean duration of recent infection `window_years`
// and false-recent proportion `false_recent`.
double kappa_recent(double rate, double prevalence, double window_years, double false_recent);

// PHIA recency assay: 130-day window expressed in years, no false recents.
inline constexpr double kPhiaWindowYears = 130.0 / 365.25;
inline constexpr double kPhiaFalseRecent = 0.0;

double normal_log_pdf(double x, double mean, double sd);
double std_normal_log_cdf(double z);

// Skew-normal density 2 phi(z) Phi(alpha z) and its logarithm.
double skewnormal_log_pdf(double z, double alpha);
double skewnormal_pdf(double z, double alpha);

// f(theta) = sn(0.5 theta_1; 2) * sn(0.8 theta_1 - 0.5 theta_2; -2). Integrates to 4.
double fig2_integrand(double theta1, double theta2);
double fig2_log_integrand(double theta1, double theta2);

inline double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace aghq

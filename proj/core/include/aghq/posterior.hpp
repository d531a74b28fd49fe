#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "aghq/adapt_pca.hpp"
#include "aghq/laplace.hpp"
#include "aghq/model_api.hpp"

namespace aghq {

// Stable log(sum(exp(v))) accumulated in index order.
double logsumexp(const std::vector<double>& values);

struct QuadPosterior {
  AdaptedGrid grid;
  std::vector<InnerFit> fits;  // one per node, in grid order
  std::vector<double> node_log_laplace;
  double log_normconst = 0.0;
  std::vector<double> node_weights;  // lambda(z), sums to one
};

struct NormalizeOptions {
  int threads = 1;
  InnerOptions inner;
};

/// Evaluates the Laplace approximation at every adapted node (in parallel,
/// each node warm-started from `warm_start`) and forms
/// log p(y) ~ log|P| + logsumexp(log p_LA(theta_z) + log w(z)).
/// Throws OptimizerError naming the node if an inner fit fails to converge.
QuadPosterior normalize(const AdaptedGrid& grid, const LogJointModel& model, const VectorXd& warm_start,
                        const NormalizeOptions& options = {});

enum class MethodTag { EB, AghqDense, PcaAghq };

std::string to_string(MethodTag tag);
MethodTag parse_method_tag(const std::string& text);

// Gaussian N(mean, H^-1) stored through the lower Cholesky factor of H.
struct GaussianComponent {
  VectorXd theta;
  VectorXd mean;
  MatrixXd precision_factor;

  static GaussianComponent from_precision(VectorXd theta, VectorXd mean, const MatrixXd& precision);
  MatrixXd covariance() const;
};

struct MixturePosterior {
  std::vector<GaussianComponent> components;
  std::vector<double> weights;
  MethodTag method = MethodTag::EB;

  // Latent mixture moments: sum lambda mean_z and the law of total variance.
  VectorXd mean() const;
  MatrixXd covariance() const;
};

MixturePosterior latent_mixture(const QuadPosterior& quad, MethodTag method);

// Single Gaussian at the Laplace mode of theta, weight one.
MixturePosterior eb_posterior(const LogJointModel& model, const OuterResult& optimum,
                              const InnerOptions& inner = {});
MixturePosterior eb_posterior(const LogJointModel& model, const OuterOptions& options = {});

struct SampleSet {
  std::vector<std::string> names;
  MatrixXd draws;  // n x d
  std::uint64_t seed = 0;
  nlohmann::json provenance = nlohmann::json::object();

  Eigen::Index column(const std::string& name) const;  // throws ConfigError
};

/// Draws a node with probability lambda, then x from that node's Gaussian
/// via a triangular solve. Columns: latent names, hyper names (the node's
/// theta), then model outputs evaluated per draw. Sequential and fully
/// determined by `seed`.
SampleSet sample(const MixturePosterior& mixture, const LogJointModel& model, std::size_t n, std::uint64_t seed);

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples);
SampleSet read_samples_csv(const std::filesystem::path& path);

struct HyperSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  bool degenerate = false;  // single distinct node value
  // Distinct projected node values with their aggregated lambda weight.
  std::vector<std::pair<double, double>> projection;
};

std::vector<HyperSummary> hyper_summaries(const QuadPosterior& quad, const std::vector<std::string>& names);

}  // namespace aghq

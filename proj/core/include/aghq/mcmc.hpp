#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "aghq/model_api.hpp"
#include "aghq/posterior.hpp"

namespace aghq {

struct McmcOptions {
  int n_chains = 4;
  int n_iter = 20000;  // per chain, warmup included
  std::uint64_t seed = 1;
  double warmup_fraction = 0.5;
  int thin = 1;
  int threads = 1;
  double init_sd = 0.1;  // initial points ~ N(0, init_sd^2) per coordinate
  double target_acceptance = 0.234;

  void validate() const;
};

struct ChainSet {
  std::vector<std::string> names;
  std::vector<MatrixXd> chains;  // post-warmup draws, one matrix per chain
  std::vector<double> acceptance;  // post-warmup acceptance rate per chain
  int warmup = 0;
  int thin = 1;
  std::uint64_t seed = 0;

  MatrixXd pooled() const;
  // Column j of every chain.
  std::vector<std::vector<double>> parameter(Eigen::Index j) const;
};

using LogDensity = std::function<double(const VectorXd&)>;

/// Adaptive random-walk Metropolis. During warmup the global proposal scale
/// follows a Robbins-Monro update toward the target acceptance rate. At
/// synchronized checkpoints the proposal shape is rebuilt from the second
/// half of every chain's history so far, pooled across chains: diagonal at the
/// first checkpoint, shrunk empirical covariance afterwards. Adaptation is
/// frozen after warmup, which is discarded. Chain c uses the stream seed + c.
ChainSet run_chains(const LogDensity& log_density, std::vector<std::string> names, const McmcOptions& options);

// Joint (x, theta) sampling of a model's log_joint; columns are latent then
// hyper names.
ChainSet run_chains(const LogJointModel& model, const McmcOptions& options);

struct EssResult {
  double value = 0.0;
  bool flagged = false;  // zero variance, no truncation, or fewer than 10
};

/// Effective sample size with Geyer's initial positive sequence on the
/// multi-chain autocorrelation estimate. Clamped to [1, total draws].
EssResult ess(const std::vector<std::vector<double>>& chains);
EssResult ess(const std::vector<double>& draws);

struct RhatResult {
  double value = 1.0;
  bool defined = true;  // false when the within-chain variance is zero
};

// Split-chain potential scale reduction factor; needs at least two chains.
RhatResult rhat(const std::vector<std::vector<double>>& chains);

struct ConvergenceReport {
  std::vector<std::string> names;
  std::vector<double> ess;
  std::vector<double> rhat;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<double> mcse;  // sd / sqrt(ess)
  double ess_min = 0.0;
  double rhat_max = 0.0;
  bool all_defined = true;

  nlohmann::json to_json() const;
};

ConvergenceReport convergence_report(const ChainSet& chains);

// Pooled post-warmup draws, with model outputs appended per draw.
SampleSet to_sample_set(const ChainSet& chains, const LogJointModel& model);

}  // namespace aghq

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aghq/adapt_pca.hpp"
#include "aghq/model_api.hpp"
#include "aghq/posterior.hpp"

namespace aghq::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitGeneric = 1,
  kExitOptimizer = 2,
  kExitCurvature = 3,
  kExitMissingArtifact = 4,
  kExitConfig = 5,
};

/// Canonical run configuration. Serialized to config.lock.json without the
/// output directory or thread count, neither of which affects results.
struct RunConfig {
  std::string model;
  nlohmann::json model_config = nlohmann::json::object();
  std::string method = "pca-aghq";  // eb | aghq | pca-aghq | mcmc
  int k = 3;
  std::optional<int> s;
  std::optional<double> pca_threshold;
  std::string decomposition = "spectral";
  int n_samples = 1000;
  int n_chains = 4;
  int n_iter = 20000;
  int thin = 1;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";

  nlohmann::json to_json() const;
  // Rejects unknown keys.
  static RunConfig from_json(const nlohmann::json& j);
  void validate() const;  // throws ConfigError
};

struct FitOutcome {
  RunConfig config;
  std::unique_ptr<LogJointModel> model;
  OuterResult optimum;
  ModeCurvature curvature;
  std::vector<double> cumulative;
  std::optional<PcaSelection> selection;
  GridSpec spec;
  QuadPosterior quad;
  MethodTag tag = MethodTag::EB;
};

/// Outer optimization, curvature, grid construction and normalization for
/// methods eb, aghq and pca-aghq.
FitOutcome run_fit(const RunConfig& config, int threads);

// config.lock.json, mode.json, scree.csv, nodes.csv, fit_state.json
void write_fit_artifacts(const FitOutcome& fit, const std::filesystem::path& dir);

// Rebuilds the mixture stored in fit_state.json; throws ArtifactError if absent.
struct StoredFit {
  RunConfig config;
  std::unique_ptr<LogJointModel> model;
  MixturePosterior mixture;
  double log_normconst = 0.0;
  std::size_t s = 0;
};
StoredFit load_fit(const std::filesystem::path& dir);

std::string scree_csv(const std::vector<double>& eigenvalues, const std::vector<double>& cumulative);

/// Entry point shared by the executable and tests. Returns the exit code.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace aghq::cli

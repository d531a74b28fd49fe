#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "aghq/posterior.hpp"

namespace aghq {

inline constexpr double kSecondNinetyThreshold = 0.81;
inline constexpr double kHighIncidenceThreshold = 0.01;
inline const double kCoverageTarget = 1.0 / std::sqrt(12.0);

// sup |F_a - F_b| over the pooled points, right-continuous ECDFs.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// sigma = 1 / (2 median^2) of pairwise Euclidean distances over the pooled rows.
double median_heuristic_sigma(const MatrixXd& a, const MatrixXd& b);

struct MmdResult {
  double value = 0.0;
  double sigma = 0.0;  // kernel exp(-sigma ||u - v||^2)
};

/// Biased V-statistic MMD with the diagonal included. The larger sample is
/// subsampled at evenly spaced rows to the smaller's count. moment_order 3
/// cubes every entry before the kernel is applied.
MmdResult mmd(const MatrixXd& a, const MatrixXd& b, std::optional<double> sigma = std::nullopt, int moment_order = 1);

// Evenly spaced rows 0, step, 2 step, ... truncated to `rows`.
MatrixXd subsample_rows(const MatrixXd& m, Eigen::Index rows);

struct PointError {
  double rmse = 0.0;
  double mae = 0.0;
};

PointError point_error(const std::vector<double>& estimate, const std::vector<double>& reference);

// Fraction of draws strictly above the threshold.
double exceedance(const std::vector<double>& draws, double threshold);

// 1 - post / prior.
double contraction(double prior_var, double post_var);

struct CoverageScore {
  double sd = 0.0;  // population sd of reference quantiles of distinct node values
  bool degenerate = false;  // fewer than two distinct node values
  std::vector<double> quantiles;
};

CoverageScore node_coverage(const std::vector<double>& node_values, const std::vector<double>& reference);

// Block of a column name: the part before '['.
std::string block_of(const std::string& name);

std::map<std::string, double> grouped_ks(const std::map<std::string, double>& ks_by_name);

struct CompareOptions {
  Eigen::Index mmd_max_rows = 2000;
  std::optional<double> bandwidth;
};

struct ComparisonReport {
  std::vector<std::string> parameters;  // common columns in a's order
  std::map<std::string, double> ks;
  std::map<std::string, double> ks_by_block;
  MmdResult mmd;
  MmdResult mmd_order3;
  PointError mean_error;
  PointError sd_error;
  nlohmann::json exceedance = nlohmann::json::object();
  Eigen::Index n_a = 0;
  Eigen::Index n_b = 0;
  std::string method_a;
  std::string method_b;

  nlohmann::json to_json() const;
};

ComparisonReport compare(const SampleSet& a, const SampleSet& b, const CompareOptions& options = {});

}  // namespace aghq

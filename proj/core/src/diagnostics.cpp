#include "aghq/diagnostics.hpp"

#include <algorithm>
#include <numeric>

#include "aghq/errors.hpp"

namespace aghq {

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("ks: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      v = a[i];
    else
      v = b[j];
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

double median_heuristic_sigma(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) dist.push_back((pooled.row(i) - pooled.row(j)).norm());
  if (dist.empty()) return 1.0;
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double median = *mid;
  if (dist.size() % 2 == 0) median = 0.5 * (median + *std::max_element(dist.begin(), mid));
  if (!(median > 0.0)) return 1.0;
  return 1.0 / (2.0 * median * median);
}

MatrixXd subsample_rows(const MatrixXd& m, Eigen::Index rows) {
  if (rows >= m.rows()) return m;
  MatrixXd out(rows, m.cols());
  for (Eigen::Index r = 0; r < rows; ++r) out.row(r) = m.row(r * m.rows() / rows);
  return out;
}

namespace {

double mean_kernel(const MatrixXd& u, const MatrixXd& v, double sigma) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < v.rows(); ++j) row += std::exp(-sigma * (u.row(i) - v.row(j)).squaredNorm());
    total += row;
  }
  return total / (static_cast<double>(u.rows()) * static_cast<double>(v.rows()));
}

}  // namespace

MmdResult mmd(const MatrixXd& a, const MatrixXd& b, std::optional<double> sigma, int moment_order) {
  if (a.cols() != b.cols()) throw ConfigError("mmd: dimension mismatch");
  if (a.rows() == 0 || b.rows() == 0) throw ConfigError("mmd: empty sample");
  if (moment_order < 1) throw ConfigError("mmd: moment order must be positive");
  const Eigen::Index s = std::min(a.rows(), b.rows());
  MatrixXd u = subsample_rows(a, s);
  MatrixXd v = subsample_rows(b, s);
  if (moment_order != 1) {
    u = u.array().pow(moment_order).matrix();
    v = v.array().pow(moment_order).matrix();
  }
  const double sg = sigma ? *sigma : median_heuristic_sigma(u, v);
  if (!(sg > 0.0)) throw ConfigError("mmd: bandwidth must be positive");
  const double inner = mean_kernel(u, u, sg) - 2.0 * mean_kernel(u, v, sg) + mean_kernel(v, v, sg);
  return MmdResult{std::sqrt(std::max(0.0, inner)), sg};
}

PointError point_error(const std::vector<double>& estimate, const std::vector<double>& reference) {
  if (estimate.size() != reference.size()) throw ConfigError("point_error: length mismatch");
  if (estimate.empty()) throw ConfigError("point_error: empty input");
  double ss = 0.0, sa = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double e = estimate[i] - reference[i];
    ss += e * e;
    sa += std::abs(e);
  }
  const auto n = static_cast<double>(estimate.size());
  return PointError{std::sqrt(ss / n), sa / n};
}

double exceedance(const std::vector<double>& draws, double threshold) {
  if (draws.empty()) throw ConfigError("exceedance: empty sample");
  const auto above = std::count_if(draws.begin(), draws.end(), [threshold](double v) { return v > threshold; });
  return static_cast<double>(above) / static_cast<double>(draws.size());
}

double contraction(double prior_var, double post_var) {
  if (!(prior_var > 0.0)) throw ConfigError("contraction: prior variance must be positive");
  if (post_var < 0.0) throw ConfigError("contraction: posterior variance must be nonnegative");
  return 1.0 - post_var / prior_var;
}

CoverageScore node_coverage(const std::vector<double>& node_values, const std::vector<double>& reference) {
  if (reference.empty()) throw ConfigError("node_coverage: empty reference sample");
  std::vector<double> distinct = node_values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end(),
                             [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(x)); }),
                 distinct.end());
  std::vector<double> sorted_ref = reference;
  std::sort(sorted_ref.begin(), sorted_ref.end());

  CoverageScore score;
  for (double v : distinct) {
    const auto count = std::upper_bound(sorted_ref.begin(), sorted_ref.end(), v) - sorted_ref.begin();
    score.quantiles.push_back(static_cast<double>(count) / static_cast<double>(sorted_ref.size()));
  }
  if (score.quantiles.size() < 2) {
    score.degenerate = true;
    score.sd = 0.0;
    return score;
  }
  const auto n = static_cast<double>(score.quantiles.size());
  const double mu = std::accumulate(score.quantiles.begin(), score.quantiles.end(), 0.0) / n;
  double ss = 0.0;
  for (double q : score.quantiles) ss += (q - mu) * (q - mu);
  score.sd = std::sqrt(ss / n);
  return score;
}

std::string block_of(const std::string& name) { return name.substr(0, name.find('[')); }

std::map<std::string, double> grouped_ks(const std::map<std::string, double>& ks_by_name) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& [name, value] : ks_by_name) {
    auto& slot = acc[block_of(name)];
    slot.first += value;
    slot.second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [block, slot] : acc) out[block] = slot.first / slot.second;
  return out;
}

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json j;
  j["parameters"] = parameters;
  j["ks"] = ks;
  j["ks_by_block"] = ks_by_block;
  j["mmd"] = mmd.value;
  j["mmd_bandwidth"] = mmd.sigma;
  j["mmd_order3"] = mmd_order3.value;
  j["mmd_order3_bandwidth"] = mmd_order3.sigma;
  j["rmse_mean"] = mean_error.rmse;
  j["mae_mean"] = mean_error.mae;
  j["rmse_sd"] = sd_error.rmse;
  j["mae_sd"] = sd_error.mae;
  j["exceedance"] = exceedance;
  j["n_a"] = n_a;
  j["n_b"] = n_b;
  j["method_a"] = method_a;
  j["method_b"] = method_b;
  return j;
}

namespace {

std::vector<double> to_vector(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double sample_sd(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mu = v.mean();
  return std::sqrt((v.array() - mu).square().sum() / static_cast<double>(v.size() - 1));
}

std::string method_of(const SampleSet& s) {
  if (s.provenance.is_object() && s.provenance.contains("method") && s.provenance["method"].is_string())
    return s.provenance["method"].get<std::string>();
  return "";
}

}  // namespace

ComparisonReport compare(const SampleSet& a, const SampleSet& b, const CompareOptions& options) {
  ComparisonReport report;
  report.n_a = a.draws.rows();
  report.n_b = b.draws.rows();
  report.method_a = method_of(a);
  report.method_b = method_of(b);
  if (report.n_a == 0 || report.n_b == 0) throw ConfigError("compare: empty sample set");

  std::vector<Eigen::Index> ia, ib;
  for (std::size_t i = 0; i < a.names.size(); ++i) {
    const auto it = std::find(b.names.begin(), b.names.end(), a.names[i]);
    if (it == b.names.end()) continue;
    report.parameters.push_back(a.names[i]);
    ia.push_back(static_cast<Eigen::Index>(i));
    ib.push_back(static_cast<Eigen::Index>(it - b.names.begin()));
  }
  if (report.parameters.empty()) throw ConfigError("compare: sample sets share no columns");

  const auto p = static_cast<Eigen::Index>(report.parameters.size());
  MatrixXd ja(report.n_a, p), jb(report.n_b, p);
  std::vector<double> mean_a, mean_b, sd_a, sd_b;
  for (Eigen::Index c = 0; c < p; ++c) {
    ja.col(c) = a.draws.col(ia[static_cast<std::size_t>(c)]);
    jb.col(c) = b.draws.col(ib[static_cast<std::size_t>(c)]);
    const std::string& name = report.parameters[static_cast<std::size_t>(c)];
    const auto va = to_vector(ja.col(c));
    const auto vb = to_vector(jb.col(c));
    report.ks[name] = ks_statistic(va, vb);
    mean_a.push_back(ja.col(c).mean());
    mean_b.push_back(jb.col(c).mean());
    sd_a.push_back(sample_sd(ja.col(c)));
    sd_b.push_back(sample_sd(jb.col(c)));

    const bool unit_a = (ja.col(c).array() > 0.0).all() && (ja.col(c).array() < 1.0).all();
    const bool unit_b = (jb.col(c).array() > 0.0).all() && (jb.col(c).array() < 1.0).all();
    if (unit_a && unit_b) {
      nlohmann::json entry;
      for (double t : {kSecondNinetyThreshold, kHighIncidenceThreshold}) {
        nlohmann::json row;
        row["threshold"] = t;
        row["a"] = exceedance(va, t);
        row["b"] = exceedance(vb, t);
        entry.push_back(row);
      }
      report.exceedance[name] = entry;
    }
  }
  report.ks_by_block = grouped_ks(report.ks);
  report.mean_error = point_error(mean_a, mean_b);
  report.sd_error = point_error(sd_a, sd_b);

  const Eigen::Index rows = std::min({report.n_a, report.n_b, options.mmd_max_rows});
  const MatrixXd sa = subsample_rows(ja, rows);
  const MatrixXd sb = subsample_rows(jb, rows);
  report.mmd = mmd(sa, sb, options.bandwidth, 1);
  report.mmd_order3 = mmd(sa, sb, options.bandwidth, 3);
  return report;
}

}  // namespace aghq

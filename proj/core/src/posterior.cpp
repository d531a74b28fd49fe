#include "aghq/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "aghq/errors.hpp"
#include "aghq/io.hpp"
#include "aghq/parallel.hpp"

namespace aghq {

double logsumexp(const std::vector<double>& values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

QuadPosterior normalize(const AdaptedGrid& grid, const LogJointModel& model, const VectorXd& warm_start,
                        const NormalizeOptions& options) {
  if (grid.theta_points.cols() != static_cast<Eigen::Index>(model.hyper_dim()))
    throw ConfigError("normalize: grid dimension does not match the model");

  QuadPosterior quad;
  quad.grid = grid;
  const std::size_t n = grid.size();
  quad.fits.resize(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    const VectorXd theta = grid.theta_points.row(static_cast<Eigen::Index>(i)).transpose();
    quad.fits[i] = log_laplace(model, theta, warm_start, options.inner);
  });

  std::vector<double> terms(n);
  quad.node_log_laplace.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!quad.fits[i].converged)
      throw OptimizerError("normalize: inner optimization did not converge at node " + std::to_string(i) +
                           " (gradient norm " + format_double(quad.fits[i].gradient_norm) + ")");
    quad.node_log_laplace[i] = quad.fits[i].log_laplace;
    terms[i] = quad.node_log_laplace[i] + grid.base.log_weights[i];
  }
  const double lse = logsumexp(terms);
  quad.log_normconst = grid.log_abs_det_transform + lse;
  quad.node_weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) quad.node_weights[i] = std::exp(terms[i] - lse);
  return quad;
}

std::string to_string(MethodTag tag) {
  switch (tag) {
    case MethodTag::EB: return "EB";
    case MethodTag::AghqDense: return "AGHQ-dense";
    case MethodTag::PcaAghq: return "PCA-AGHQ";
  }
  return "?";
}

MethodTag parse_method_tag(const std::string& text) {
  if (text == "EB") return MethodTag::EB;
  if (text == "AGHQ-dense") return MethodTag::AghqDense;
  if (text == "PCA-AGHQ") return MethodTag::PcaAghq;
  throw ConfigError("unknown method tag '" + text + "'");
}

GaussianComponent GaussianComponent::from_precision(VectorXd theta, VectorXd mean, const MatrixXd& precision) {
  GaussianComponent c{std::move(theta), std::move(mean), MatrixXd()};
  if (c.mean.size() == 0) {
    c.precision_factor = MatrixXd(0, 0);
    return c;
  }
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw CurvatureError("GaussianComponent: precision is not positive definite");
  c.precision_factor = llt.matrixL();
  return c;
}

MatrixXd GaussianComponent::covariance() const {
  const Eigen::Index n = mean.size();
  if (n == 0) return MatrixXd(0, 0);
  const MatrixXd linv = precision_factor.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n, n));
  return linv.transpose() * linv;
}

VectorXd MixturePosterior::mean() const {
  if (components.empty()) return VectorXd(0);
  VectorXd mu = VectorXd::Zero(components.front().mean.size());
  for (std::size_t i = 0; i < components.size(); ++i) mu += weights[i] * components[i].mean;
  return mu;
}

MatrixXd MixturePosterior::covariance() const {
  if (components.empty()) return MatrixXd(0, 0);
  const VectorXd mu = mean();
  const Eigen::Index n = mu.size();
  MatrixXd cov = MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < components.size(); ++i) {
    const VectorXd d = components[i].mean - mu;
    cov += weights[i] * (components[i].covariance() + d * d.transpose());
  }
  return cov;
}

MixturePosterior latent_mixture(const QuadPosterior& quad, MethodTag method) {
  MixturePosterior mix;
  mix.method = method;
  mix.weights = quad.node_weights;
  mix.components.reserve(quad.fits.size());
  for (const auto& fit : quad.fits)
    mix.components.push_back(GaussianComponent{fit.theta, fit.x_hat, fit.hessian_factor});
  return mix;
}

MixturePosterior eb_posterior(const LogJointModel& model, const OuterResult& optimum, const InnerOptions& inner) {
  const InnerFit fit = log_laplace(model, optimum.theta_hat, optimum.x_hat, inner);
  MixturePosterior mix;
  mix.method = MethodTag::EB;
  mix.weights = {1.0};
  mix.components.push_back(GaussianComponent{fit.theta, fit.x_hat, fit.hessian_factor});
  return mix;
}

MixturePosterior eb_posterior(const LogJointModel& model, const OuterOptions& options) {
  const OuterResult optimum = outer_optimize(model, VectorXd::Zero(static_cast<Eigen::Index>(model.hyper_dim())), options);
  return eb_posterior(model, optimum, options.inner);
}

Eigen::Index SampleSet::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Eigen::Index>(i);
  throw ConfigError("sample column not found: " + name);
}

SampleSet sample(const MixturePosterior& mixture, const LogJointModel& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample: at least one draw required");
  if (mixture.components.empty() || mixture.components.size() != mixture.weights.size())
    throw ConfigError("sample: mixture has no components or mismatched weights");

  const auto& space = model.space();
  const std::vector<std::string> outputs = model.output_names();
  const auto n_latent = static_cast<Eigen::Index>(mixture.components.front().mean.size());
  const auto n_hyper = static_cast<Eigen::Index>(mixture.components.front().theta.size());
  const auto n_out = static_cast<Eigen::Index>(outputs.size());

  SampleSet set;
  set.seed = seed;
  if (n_latent == static_cast<Eigen::Index>(space.latent_dim())) {
    set.names = space.latent_names;
  } else {
    for (Eigen::Index i = 0; i < n_latent; ++i) set.names.push_back("x[" + std::to_string(i + 1) + "]");
  }
  set.names.insert(set.names.end(), space.hyper_names.begin(), space.hyper_names.end());
  set.names.insert(set.names.end(), outputs.begin(), outputs.end());
  set.draws.resize(static_cast<Eigen::Index>(n), n_latent + n_hyper + n_out);

  std::vector<double> cumulative(mixture.weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cumulative.size(); ++i) cumulative[i] = (acc += mixture.weights[i]);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  VectorXd eps(n_latent);
  for (std::size_t d = 0; d < n; ++d) {
    const double u = uniform(rng) * acc;
    std::size_t node = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    node = std::min(node, cumulative.size() - 1);
    const auto& comp = mixture.components[node];

    for (Eigen::Index i = 0; i < n_latent; ++i) eps(i) = normal(rng);
    VectorXd x = comp.mean;
    if (n_latent > 0) x += comp.precision_factor.transpose().triangularView<Eigen::Upper>().solve(eps);

    const auto row = static_cast<Eigen::Index>(d);
    set.draws.row(row).head(n_latent) = x.transpose();
    set.draws.row(row).segment(n_latent, n_hyper) = comp.theta.transpose();
    if (n_out > 0) set.draws.row(row).tail(n_out) = model.output_map(x, comp.theta).transpose();
  }
  return set;
}

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples) {
  write_matrix_csv(path, samples.names, samples.draws);
}

SampleSet read_samples_csv(const std::filesystem::path& path) {
  SampleSet set;
  set.draws = read_matrix_csv(path, &set.names);
  return set;
}

std::vector<HyperSummary> hyper_summaries(const QuadPosterior& quad, const std::vector<std::string>& names) {
  const Eigen::Index m = quad.grid.theta_points.cols();
  const std::size_t n = quad.node_weights.size();
  std::vector<HyperSummary> out;
  for (Eigen::Index j = 0; j < m; ++j) {
    HyperSummary s;
    s.name = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                        : "theta[" + std::to_string(j + 1) + "]";
    for (std::size_t i = 0; i < n; ++i) s.mean += quad.node_weights[i] * quad.grid.theta_points(static_cast<Eigen::Index>(i), j);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = quad.grid.theta_points(static_cast<Eigen::Index>(i), j) - s.mean;
      var += quad.node_weights[i] * d * d;
    }
    s.sd = std::sqrt(std::max(var, 0.0));

    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < n; ++i)
      pts.emplace_back(quad.grid.theta_points(static_cast<Eigen::Index>(i), j), quad.node_weights[i]);
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& p : pts) {
      if (!s.projection.empty() &&
          std::abs(p.first - s.projection.back().first) <= 1e-12 * std::max(1.0, std::abs(p.first))) {
        s.projection.back().second += p.second;
      } else {
        s.projection.push_back(p);
      }
    }
    s.degenerate = s.projection.size() < 2;
    if (s.degenerate) s.sd = 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace aghq

#include "aghq/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "aghq/errors.hpp"
#include "aghq/parallel.hpp"

namespace aghq {

void McmcOptions::validate() const {
  if (n_chains < 1) throw ConfigError("mcmc: n_chains must be positive");
  if (n_iter < 4) throw ConfigError("mcmc: n_iter must be at least 4");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) throw ConfigError("mcmc: warmup fraction must lie in (0, 1)");
  if (thin < 1) throw ConfigError("mcmc: thin must be positive");
  if (!(init_sd > 0.0)) throw ConfigError("mcmc: init_sd must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw ConfigError("mcmc: target acceptance must lie in (0, 1)");
}

MatrixXd ChainSet::pooled() const {
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.rows();
  MatrixXd out(rows, chains.empty() ? 0 : chains.front().cols());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.rows()) = c;
    r += c.rows();
  }
  return out;
}

std::vector<std::vector<double>> ChainSet::parameter(Eigen::Index j) const {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    std::vector<double> col(static_cast<std::size_t>(c.rows()));
    for (Eigen::Index i = 0; i < c.rows(); ++i) col[static_cast<std::size_t>(i)] = c(i, j);
    out.push_back(std::move(col));
  }
  return out;
}

namespace {

MatrixXd proposal_factor(const MatrixXd& window, bool diagonal_only) {
  const Eigen::Index d = window.cols();
  const VectorXd mean = window.colwise().mean();
  const MatrixXd centered = window.rowwise() - mean.transpose();
  MatrixXd cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(window.rows() - 1));
  // Shrink toward the diagonal with a prior weight of 10 d draws.
  const double n = static_cast<double>(window.rows());
  const double n0 = 10.0 * static_cast<double>(d);
  const MatrixXd diag = cov.diagonal().asDiagonal();
  cov = diagonal_only ? diag : MatrixXd((n * cov + n0 * diag) / (n + n0));
  const double jitter = 1e-10 * std::max(1.0, cov.diagonal().maxCoeff());
  cov.diagonal().array() += jitter;
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return MatrixXd::Identity(d, d);
  return llt.matrixL();
}

struct ChainState {
  std::mt19937_64 rng;
  VectorXd x;
  double lp = 0.0;
  double log_scale = 0.0;
  int since_checkpoint = 0;
  long warmup_accepts = 0;
  long post_accepts = 0;
  MatrixXd history;  // warmup draws
  MatrixXd draws;    // kept post-warmup draws
  int kept = 0;
};

void advance(ChainState& c, const LogDensity& log_density, const MatrixXd& factor, const McmcOptions& options,
             int warmup, int from, int to) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Index d = c.x.size();
  VectorXd eps(d);
  for (int it = from; it < to; ++it) {
    for (Eigen::Index i = 0; i < d; ++i) eps(i) = normal(c.rng);
    const VectorXd proposal = c.x + std::exp(c.log_scale) * (factor * eps);
    const double lp_new = log_density(proposal);
    const double log_ratio = std::isfinite(lp_new) ? lp_new - c.lp : -std::numeric_limits<double>::infinity();
    const double accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    const bool accept = uniform(c.rng) < accept_prob;
    if (accept) {
      c.x = proposal;
      c.lp = lp_new;
    }
    if (it < warmup) {
      c.history.row(it) = c.x.transpose();
      ++c.since_checkpoint;
      c.log_scale += (accept_prob - options.target_acceptance) / std::pow(c.since_checkpoint + 1.0, 0.6);
      c.warmup_accepts += accept ? 1 : 0;
    } else {
      c.post_accepts += accept ? 1 : 0;
      if ((it - warmup) % options.thin == 0) c.draws.row(c.kept++) = c.x.transpose();
    }
  }
}

}  // namespace

ChainSet run_chains(const LogDensity& log_density, std::vector<std::string> names, const McmcOptions& options) {
  options.validate();
  const auto d = static_cast<Eigen::Index>(names.size());
  if (d == 0) throw ConfigError("mcmc: target has no parameters");
  const auto n_chains = static_cast<std::size_t>(options.n_chains);
  const int warmup = static_cast<int>(std::floor(options.n_iter * options.warmup_fraction));
  const int kept = (options.n_iter - warmup + options.thin - 1) / options.thin;
  const double base_log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));

  std::vector<ChainState> chains(n_chains);
  for (std::size_t c = 0; c < n_chains; ++c) {
    ChainState& st = chains[c];
    st.rng.seed(options.seed + c);
    std::normal_distribution<double> normal(0.0, 1.0);
    st.x.resize(d);
    st.lp = -std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 100 && !std::isfinite(st.lp); ++attempt) {
      for (Eigen::Index i = 0; i < d; ++i) st.x(i) = options.init_sd * normal(st.rng);
      st.lp = log_density(st.x);
    }
    if (!std::isfinite(st.lp)) throw Error("mcmc: log density is not finite near the initialization ball");
    st.log_scale = base_log_scale;
    st.history.resize(warmup, d);
    st.draws.resize(kept, d);
  }

  // Doubling windows from 40 d iterations, then every eighth of warmup. At
  // each checkpoint the proposal shape is re-estimated from the second half
  // of the warmup so far, pooled over chains in chain order.
  std::vector<int> checkpoints;
  for (int t = 40 * static_cast<int>(d); t < warmup / 8; t *= 2) checkpoints.push_back(t);
  for (int eighth = 1; eighth < 8; ++eighth)
    if (eighth * warmup / 8 > (checkpoints.empty() ? 0 : checkpoints.back())) checkpoints.push_back(eighth * warmup / 8);
  checkpoints.push_back(warmup);

  MatrixXd factor = MatrixXd::Identity(d, d);
  int done = 0;
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    const int target = checkpoints[k];
    parallel_for(n_chains, options.threads,
                 [&](std::size_t c) { advance(chains[c], log_density, factor, options, warmup, done, target); });
    done = target;
    if (target == warmup) break;
    const int begin = target / 2;
    const int len = target - begin;
    if (len < 2) continue;
    MatrixXd pooled(len * static_cast<Eigen::Index>(n_chains), d);
    for (std::size_t c = 0; c < n_chains; ++c)
      pooled.middleRows(static_cast<Eigen::Index>(c) * len, len) = chains[c].history.middleRows(begin, len);
    factor = proposal_factor(pooled, k == 0);
    for (auto& st : chains) {
      st.log_scale = base_log_scale;
      st.since_checkpoint = 0;
    }
  }

  for (std::size_t c = 0; c < n_chains; ++c) {
    const double rate = warmup > 0 ? static_cast<double>(chains[c].warmup_accepts) / warmup : 1.0;
    if (rate < 0.01) {
      std::ostringstream msg;
      msg << "mcmc: warmup acceptance rate " << rate << " below 0.01 in chain " << c << " (proposal scale "
          << std::exp(chains[c].log_scale) << ", seed " << options.seed + c << ")";
      throw Error(msg.str());
    }
  }

  parallel_for(n_chains, options.threads, [&](std::size_t c) {
    advance(chains[c], log_density, factor, options, warmup, warmup, options.n_iter);
  });

  ChainSet set;
  set.names = std::move(names);
  set.warmup = warmup;
  set.thin = options.thin;
  set.seed = options.seed;
  for (auto& st : chains) {
    set.chains.push_back(std::move(st.draws));
    set.acceptance.push_back(static_cast<double>(st.post_accepts) / static_cast<double>(options.n_iter - warmup));
  }
  return set;
}

ChainSet run_chains(const LogJointModel& model, const McmcOptions& options) {
  const auto n = static_cast<Eigen::Index>(model.latent_dim());
  const auto m = static_cast<Eigen::Index>(model.hyper_dim());
  std::vector<std::string> names = model.space().latent_names;
  names.insert(names.end(), model.space().hyper_names.begin(), model.space().hyper_names.end());
  auto target = [&model, n, m](const VectorXd& z) {
    return model.log_joint(z.head(n), z.tail(m));
  };
  return run_chains(target, std::move(names), options);
}

EssResult ess(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw ConfigError("ess: no chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw ConfigError("ess: chains differ in length");
  if (n < 4) throw ConfigError("ess: need at least 4 draws per chain");
  const auto m = static_cast<double>(chains.size());
  const double total = m * static_cast<double>(n);

  std::vector<double> means, vars;
  for (const auto& c : chains) {
    const double mu = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    means.push_back(mu);
    vars.push_back(ss / static_cast<double>(n - 1));
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  double b_over_n = 0.0;
  if (chains.size() > 1) {
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    for (double mu : means) b_over_n += (mu - grand) * (mu - grand);
    b_over_n /= (m - 1.0);
  }
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b_over_n;
  if (!(w > 0.0) || !(var_plus > 0.0)) return EssResult{1.0, true};

  // rho_t = 1 - (W - mean_m acov_m(t)) / var_plus, biased autocovariances.
  auto rho = [&](std::size_t lag) {
    double mean_acov = 0.0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      const auto& x = chains[c];
      double acc = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - means[c]) * (x[i + lag] - means[c]);
      mean_acov += acc / static_cast<double>(n);
    }
    mean_acov /= m;
    return 1.0 - (w - mean_acov) / var_plus;
  };

  // Geyer initial positive and monotone sequence over pairs (rho_2k + rho_2k+1).
  double sum_pairs = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  bool truncated = false;
  std::size_t lag = 0;
  double rho_even = 1.0;
  for (; lag + 1 < n; lag += 2) {
    if (lag > 0) rho_even = rho(lag);
    const double rho_odd = rho(lag + 1);
    double pair = rho_even + rho_odd;
    if (pair < 0.0) {
      truncated = true;
      break;
    }
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    sum_pairs += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / std::log10(total));
  double value = total / tau;
  value = std::clamp(value, 1.0, total);
  return EssResult{value, !truncated || value < 10.0};
}

EssResult ess(const std::vector<double>& draws) { return ess(std::vector<std::vector<double>>{draws}); }

RhatResult rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ConfigError("rhat: need at least two chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw ConfigError("rhat: chains differ in length");
  const std::size_t half = n / 2;
  if (half < 2) throw ConfigError("rhat: chains too short to split");

  std::vector<std::vector<double>> split;
  for (const auto& c : chains) {
    split.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    split.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  const auto m = static_cast<double>(split.size());
  const auto len = static_cast<double>(half);
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : split) {
    const double mu = std::accumulate(c.begin(), c.end(), 0.0) / len;
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    means.push_back(mu);
    w += ss / (len - 1.0);
  }
  w /= m;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= len / (m - 1.0);
  if (!(w > 0.0)) return RhatResult{std::numeric_limits<double>::quiet_NaN(), false};
  const double var_plus = (len - 1.0) / len * w + b / len;
  return RhatResult{std::sqrt(var_plus / w), true};
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json j;
  j["names"] = names;
  j["ess"] = ess;
  j["rhat"] = rhat;
  j["mean"] = mean;
  j["sd"] = sd;
  j["mcse"] = mcse;
  j["ess_min"] = ess_min;
  j["rhat_max"] = rhat_max;
  j["all_defined"] = all_defined;
  return j;
}

ConvergenceReport convergence_report(const ChainSet& chains) {
  ConvergenceReport report;
  report.names = chains.names;
  report.ess_min = std::numeric_limits<double>::infinity();
  report.rhat_max = 0.0;
  for (std::size_t j = 0; j < chains.names.size(); ++j) {
    const auto cols = chains.parameter(static_cast<Eigen::Index>(j));
    const EssResult e = ess(cols);
    double r = 1.0;
    if (cols.size() >= 2) {
      const RhatResult rr = rhat(cols);
      if (rr.defined) {
        r = rr.value;
      } else {
        report.all_defined = false;
        r = 1.0;
      }
    }
    double sum = 0.0, sum_sq = 0.0, count = 0.0;
    for (const auto& c : cols)
      for (double v : c) {
        sum += v;
        count += 1.0;
      }
    const double mu = sum / count;
    for (const auto& c : cols)
      for (double v : c) sum_sq += (v - mu) * (v - mu);
    const double sd = std::sqrt(sum_sq / std::max(1.0, count - 1.0));

    report.ess.push_back(e.value);
    report.rhat.push_back(r);
    report.mean.push_back(mu);
    report.sd.push_back(sd);
    report.mcse.push_back(sd / std::sqrt(e.value));
    report.ess_min = std::min(report.ess_min, e.value);
    report.rhat_max = std::max(report.rhat_max, r);
  }
  return report;
}

SampleSet to_sample_set(const ChainSet& chains, const LogJointModel& model) {
  const auto n = static_cast<Eigen::Index>(model.latent_dim());
  const auto m = static_cast<Eigen::Index>(model.hyper_dim());
  const MatrixXd pooled = chains.pooled();
  const std::vector<std::string> outputs = model.output_names();
  const auto n_out = static_cast<Eigen::Index>(outputs.size());

  SampleSet set;
  set.seed = chains.seed;
  set.names = chains.names;
  set.names.insert(set.names.end(), outputs.begin(), outputs.end());
  set.draws.resize(pooled.rows(), n + m + n_out);
  set.draws.leftCols(n + m) = pooled;
  for (Eigen::Index r = 0; r < pooled.rows() && n_out > 0; ++r) {
    const VectorXd x = pooled.row(r).head(n).transpose();
    const VectorXd theta = pooled.row(r).segment(n, m).transpose();
    set.draws.row(r).tail(n_out) = model.output_map(x, theta).transpose();
  }
  return set;
}

}  // namespace aghq

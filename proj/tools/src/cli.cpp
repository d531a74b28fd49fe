#include "aghq_cli/cli.hpp"

#include <algorithm>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "aghq/diagnostics.hpp"
#include "aghq/errors.hpp"
#include "aghq/ghq_rules.hpp"
#include "aghq/io.hpp"
#include "aghq/mcmc.hpp"
#include "aghq/models.hpp"

namespace aghq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kMethods = {"eb", "aghq", "pca-aghq", "mcmc"};

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd to_eigen(const json& j) {
  const auto values = j.get<std::vector<double>>();
  VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

json require(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactError("missing artifact: " + path.string());
  return read_json(path);
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["model"] = model;
  j["model_config"] = model_config;
  j["method"] = method;
  j["k"] = k;
  if (s) j["s"] = *s;
  if (pca_threshold) j["pca_threshold"] = *pca_threshold;
  j["decomposition"] = decomposition;
  j["n_samples"] = n_samples;
  j["n_chains"] = n_chains;
  j["n_iter"] = n_iter;
  j["thin"] = thin;
  if (seed) j["seed"] = *seed;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {"model", "model_config", "method",  "k",      "s",
                                              "pca_threshold", "decomposition", "n_samples", "n_chains",
                                              "n_iter", "thin", "seed", "output_dir"};
  for (const auto& item : j.items())
    if (!known.count(item.key())) throw ConfigError("unknown config key: " + item.key());
  RunConfig c;
  try {
    if (j.contains("model")) c.model = j["model"].get<std::string>();
    if (j.contains("model_config")) c.model_config = j["model_config"];
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("k")) c.k = j["k"].get<int>();
    if (j.contains("s") && !j["s"].is_null()) c.s = j["s"].get<int>();
    if (j.contains("pca_threshold") && !j["pca_threshold"].is_null())
      c.pca_threshold = j["pca_threshold"].get<double>();
    if (j.contains("decomposition")) c.decomposition = j["decomposition"].get<std::string>();
    if (j.contains("n_samples")) c.n_samples = j["n_samples"].get<int>();
    if (j.contains("n_chains")) c.n_chains = j["n_chains"].get<int>();
    if (j.contains("n_iter")) c.n_iter = j["n_iter"].get<int>();
    if (j.contains("thin")) c.thin = j["thin"].get<int>();
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  return c;
}

void RunConfig::validate() const {
  if (model.empty()) throw ConfigError("config: model is required");
  if (!model_config.is_object()) throw ConfigError("config: model_config must be an object");
  if (!kMethods.count(method)) throw ConfigError("config: unknown method '" + method + "'");
  if (k < 1 || k > kMaxRuleLevel) throw ConfigError("config: k must lie in [1, 25]");
  parse_decomposition(decomposition);
  if (s && pca_threshold) throw ConfigError("config: s and pca_threshold are mutually exclusive");
  if (method == "pca-aghq") {
    if (decomposition != "spectral") throw ConfigError("config: pca-aghq requires the spectral decomposition");
    if (!s && !pca_threshold) throw ConfigError("config: pca-aghq needs s or pca_threshold");
  }
  if (s && *s < 1) throw ConfigError("config: s must be positive");
  if (pca_threshold && !(*pca_threshold > 0.0 && *pca_threshold <= 1.0))
    throw ConfigError("config: pca_threshold must lie in (0, 1]");
  if (n_samples < 1) throw ConfigError("config: n_samples must be positive");
  if (n_chains < 1 || n_iter < 4 || thin < 1) throw ConfigError("config: invalid chain settings");
  if (!seed) throw ConfigError("config: seed is required");
}

FitOutcome run_fit(const RunConfig& config, int threads) {
  config.validate();
  if (config.method == "mcmc") throw ConfigError("fit: method mcmc is run by the mcmc command");

  FitOutcome out;
  out.config = config;
  out.model = make_model(config.model, config.model_config);
  const std::size_t m = out.model->hyper_dim();

  OuterOptions outer;
  outer.threads = threads;
  out.optimum = outer_optimize(*out.model, VectorXd::Zero(static_cast<Eigen::Index>(m)), outer);

  CurvatureOptions curv;
  curv.threads = threads;
  out.curvature = outer_curvature(*out.model, out.optimum.theta_hat, out.optimum.x_hat, curv);
  out.cumulative = cumulative_proportions(out.curvature);

  Decomposition decomposition = parse_decomposition(config.decomposition);
  if (config.method == "eb") {
    out.spec = GridSpec::uniform(m, 1);
    out.tag = MethodTag::EB;
  } else if (config.method == "aghq") {
    out.spec = GridSpec::uniform(m, config.k);
    out.tag = MethodTag::AghqDense;
  } else {
    if (config.s && static_cast<std::size_t>(*config.s) > m)
      throw ConfigError("config: s = " + std::to_string(*config.s) + " exceeds the hyperparameter count " +
                        std::to_string(m));
    out.selection = config.s ? fixed_rank(out.curvature, static_cast<std::size_t>(*config.s))
                             : select_rank(out.curvature, *config.pca_threshold);
    out.spec = GridSpec::pca(m, out.selection->s, config.k);
    out.tag = MethodTag::PcaAghq;
    decomposition = Decomposition::Spectral;
  }

  const AdaptedGrid grid = build_adapted_grid(out.curvature, out.spec, decomposition, point_budget_from_env());
  NormalizeOptions norm;
  norm.threads = threads;
  out.quad = normalize(grid, *out.model, out.optimum.x_hat, norm);
  return out;
}

std::string scree_csv(const std::vector<double>& eigenvalues, const std::vector<double>& cumulative) {
  CsvTable table;
  table.header = {"rank", "eigenvalue", "cumulative_proportion"};
  for (std::size_t j = 0; j < eigenvalues.size(); ++j)
    table.rows.push_back({std::to_string(j + 1), format_double(eigenvalues[j]), format_double(cumulative[j])});
  return to_csv_string(table);
}

void write_fit_artifacts(const FitOutcome& fit, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& space = fit.model->space();
  const std::vector<double> eig = to_std(fit.curvature.eigenvalues);

  write_json(dir / "config.lock.json", fit.config.to_json());

  json mode;
  mode["model"] = fit.config.model;
  mode["method"] = to_string(fit.tag);
  mode["hyper_names"] = space.hyper_names;
  mode["theta_hat"] = to_std(fit.optimum.theta_hat);
  mode["log_laplace_at_mode"] = fit.optimum.log_laplace;
  mode["outer_iterations"] = fit.optimum.iterations;
  mode["eigenvalues"] = eig;
  mode["cumulative_proportion"] = fit.cumulative;
  mode["k"] = fit.tag == MethodTag::EB ? 1 : fit.config.k;
  mode["levels"] = fit.spec.levels;
  const std::size_t s = fit.selection ? fit.selection->s : fit.curvature.dim();
  mode["s"] = s;
  mode["variance_explained"] = fit.selection ? fit.selection->variance_explained : 1.0;
  mode["log_normconst"] = fit.quad.log_normconst;
  mode["n_nodes"] = fit.quad.fits.size();
  json curvature = json::array();
  for (Eigen::Index r = 0; r < fit.curvature.curvature.rows(); ++r)
    curvature.push_back(to_std(fit.curvature.curvature.row(r).transpose()));
  mode["curvature"] = curvature;
  write_json(dir / "mode.json", mode);

  write_text(dir / "scree.csv", scree_csv(eig, fit.cumulative));

  CsvTable nodes;
  nodes.header = space.hyper_names;
  nodes.header.push_back("weight");
  nodes.header.push_back("log_laplace");
  for (std::size_t p = 0; p < fit.quad.fits.size(); ++p) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < fit.quad.fits[p].theta.size(); ++j)
      row.push_back(format_double(fit.quad.fits[p].theta(j)));
    row.push_back(format_double(fit.quad.node_weights[p]));
    row.push_back(format_double(fit.quad.node_log_laplace[p]));
    nodes.rows.push_back(std::move(row));
  }
  write_csv(dir / "nodes.csv", nodes);

  json state;
  state["config"] = fit.config.to_json();
  state["method"] = to_string(fit.tag);
  state["log_normconst"] = fit.quad.log_normconst;
  state["s"] = s;
  json list = json::array();
  for (std::size_t p = 0; p < fit.quad.fits.size(); ++p) {
    json node;
    node["theta"] = to_std(fit.quad.fits[p].theta);
    node["x_hat"] = to_std(fit.quad.fits[p].x_hat);
    node["weight"] = fit.quad.node_weights[p];
    list.push_back(node);
  }
  state["nodes"] = list;
  write_json(dir / "fit_state.json", state);
}

StoredFit load_fit(const fs::path& dir) {
  const json state = require(dir / "fit_state.json");
  StoredFit out;
  try {
    out.config = RunConfig::from_json(state.at("config"));
    out.model = make_model(out.config.model, out.config.model_config);
    out.mixture.method = parse_method_tag(state.at("method").get<std::string>());
    out.log_normconst = state.at("log_normconst").get<double>();
    out.s = state.at("s").get<std::size_t>();
    for (const auto& node : state.at("nodes")) {
      const VectorXd theta = to_eigen(node.at("theta"));
      const VectorXd x_hat = to_eigen(node.at("x_hat"));
      const MatrixXd h = x_hat.size() > 0 ? out.model->latent_hessian(x_hat, theta) : MatrixXd(0, 0);
      out.mixture.components.push_back(GaussianComponent::from_precision(theta, x_hat, h));
      out.mixture.weights.push_back(node.at("weight").get<double>());
    }
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed fit_state.json: ") + e.what());
  }
  return out;
}

namespace {

struct Flags {
  int threads = 1;
  std::string config_path;
  std::string model;
  std::string model_config;
  std::string method;
  int k = 0;
  int s = 0;
  double pca_threshold = 0.0;
  std::string decomposition;
  int n_samples = 0;
  int n_chains = 0;
  int n_iter = 0;
  int thin = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void add_config_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration");
  cmd->add_option("--model", f.model, "Built-in model name");
  cmd->add_option("--model-config", f.model_config, "Model configuration as JSON text");
  cmd->add_option("--method", f.method, "eb | aghq | pca-aghq | mcmc");
  cmd->add_option("--k", f.k, "Quadrature level per retained dimension");
  cmd->add_option("--s", f.s, "Retained PCA rank");
  cmd->add_option("--pca-threshold", f.pca_threshold, "Variance share selecting the PCA rank");
  cmd->add_option("--decomposition", f.decomposition, "cholesky | spectral");
  cmd->add_option("--n-samples", f.n_samples, "Number of posterior draws");
  cmd->add_option("--n-chains", f.n_chains, "MCMC chains");
  cmd->add_option("--n-iter", f.n_iter, "MCMC iterations per chain, warmup included");
  cmd->add_option("--thin", f.thin, "MCMC thinning interval");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--out", f.out, "Output directory");
}

// Flags override the config file.
RunConfig resolve_config(const CLI::App* cmd, const Flags& f) {
  RunConfig c;
  if (!f.config_path.empty()) {
    if (!fs::exists(f.config_path)) throw ConfigError("config file not found: " + f.config_path);
    try {
      c = RunConfig::from_json(read_json(f.config_path));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  if (cmd->count("--model")) c.model = f.model;
  if (cmd->count("--model-config")) {
    try {
      c.model_config = json::parse(f.model_config);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("--model-config parse error: ") + e.what());
    }
  }
  if (cmd->count("--method")) c.method = f.method;
  if (cmd->count("--k")) c.k = f.k;
  if (cmd->count("--s")) {
    c.s = f.s;
    c.pca_threshold.reset();
  }
  if (cmd->count("--pca-threshold")) {
    c.pca_threshold = f.pca_threshold;
    c.s.reset();
  }
  if (cmd->count("--decomposition")) c.decomposition = f.decomposition;
  if (cmd->count("--n-samples")) c.n_samples = f.n_samples;
  if (cmd->count("--n-chains")) c.n_chains = f.n_chains;
  if (cmd->count("--n-iter")) c.n_iter = f.n_iter;
  if (cmd->count("--thin")) c.thin = f.thin;
  if (cmd->count("--seed")) c.seed = f.seed;
  if (cmd->count("--out")) c.output_dir = f.out;
  return c;
}

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> levels;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      levels.push_back(k);
    } catch (const std::exception&) {
      throw ConfigError("invalid level '" + item + "'");
    }
  }
  if (levels.empty()) throw ConfigError("--levels needs at least one level");
  return levels;
}

int cmd_nodes(const std::string& levels_text, const std::string& out) {
  GridSpec spec{parse_levels(levels_text)};
  const QuadratureGrid grid = product_grid(spec, point_budget_from_env());
  CsvTable table;
  for (std::size_t j = 0; j < grid.dim; ++j) table.header.push_back("dim" + std::to_string(j + 1));
  table.header.push_back("weight");
  for (std::size_t p = 0; p < grid.size(); ++p) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < grid.dim; ++j)
      row.push_back(format_double(grid.points(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j))));
    row.push_back(format_double(grid.weights[p]));
    table.rows.push_back(std::move(row));
  }
  if (out.empty())
    std::cout << to_csv_string(table);
  else
    write_csv(out, table);
  return kExitOk;
}

int cmd_fit(const RunConfig& config, int threads) {
  const FitOutcome fit = run_fit(config, threads);
  write_fit_artifacts(fit, config.output_dir);
  std::cerr << "fit: " << to_string(fit.tag) << " with " << fit.quad.fits.size()
            << " nodes, log_normconst = " << format_double(fit.quad.log_normconst) << "\n";
  return kExitOk;
}

int cmd_sample(const fs::path& fit_dir, std::optional<int> n_flag, std::optional<std::uint64_t> seed_flag,
               const std::optional<std::string>& out_flag) {
  const StoredFit stored = load_fit(fit_dir);
  const int n = n_flag.value_or(stored.config.n_samples);
  const std::uint64_t seed = seed_flag ? *seed_flag : stored.config.seed.value_or(0);
  if (n < 1) throw ConfigError("sample: n must be positive");
  const fs::path out = out_flag ? fs::path(*out_flag) : fit_dir;
  fs::create_directories(out);

  SampleSet set = sample(stored.mixture, *stored.model, static_cast<std::size_t>(n), seed);
  const std::string lock = stored.config.to_json().dump();
  json prov;
  prov["method"] = to_string(stored.mixture.method);
  prov["model"] = stored.config.model;
  prov["k"] = stored.mixture.method == MethodTag::EB ? 1 : stored.config.k;
  prov["s"] = stored.s;
  prov["seed"] = seed;
  prov["n_samples"] = n;
  prov["log_normconst"] = stored.log_normconst;
  prov["config_digest"] = digest_hex(lock);
  set.provenance = prov;
  write_samples_csv(out / "samples.csv", set);
  write_json(out / "provenance.json", prov);
  return kExitOk;
}

int cmd_mcmc(RunConfig config, int threads) {
  config.method = "mcmc";
  config.validate();
  const auto model = make_model(config.model, config.model_config);
  McmcOptions opts;
  opts.n_chains = config.n_chains;
  opts.n_iter = config.n_iter;
  opts.seed = *config.seed;
  opts.thin = config.thin;
  opts.threads = threads;
  const ChainSet chains = run_chains(*model, opts);
  const ConvergenceReport report = convergence_report(chains);

  const fs::path out = config.output_dir;
  fs::create_directories(out);
  write_json(out / "config.lock.json", config.to_json());
  SampleSet set = to_sample_set(chains, *model);
  json prov;
  prov["method"] = "MCMC";
  prov["model"] = config.model;
  prov["seed"] = *config.seed;
  prov["n_chains"] = config.n_chains;
  prov["n_iter"] = config.n_iter;
  prov["thin"] = config.thin;
  prov["acceptance"] = chains.acceptance;
  prov["config_digest"] = digest_hex(config.to_json().dump());
  set.provenance = prov;
  write_samples_csv(out / "samples.csv", set);
  write_json(out / "provenance.json", prov);
  write_json(out / "convergence.json", report.to_json());
  std::cerr << "mcmc: ess_min = " << format_double(report.ess_min)
            << ", rhat_max = " << format_double(report.rhat_max) << "\n";
  return kExitOk;
}

SampleSet load_samples(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactError("missing artifact: " + path.string());
  SampleSet set = read_samples_csv(path);
  const fs::path prov = path.parent_path() / "provenance.json";
  if (fs::exists(prov)) set.provenance = read_json(prov);
  return set;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& report_path) {
  const SampleSet sa = load_samples(a);
  const SampleSet sb = load_samples(b);
  const ComparisonReport report = compare(sa, sb);
  const json j = report.to_json();
  if (report_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json(report_path, j);
  return kExitOk;
}

int cmd_diagnose(const fs::path& fit_dir, const std::string& reference, const std::string& out_text) {
  const json mode = require(fit_dir / "mode.json");
  const fs::path nodes_path = fit_dir / "nodes.csv";
  if (!fs::exists(nodes_path)) throw ArtifactError("missing artifact: " + nodes_path.string());
  const fs::path out = out_text.empty() ? fit_dir : fs::path(out_text);
  fs::create_directories(out);

  write_text(out / "scree.csv", scree_csv(mode.at("eigenvalues").get<std::vector<double>>(),
                                          mode.at("cumulative_proportion").get<std::vector<double>>()));
  if (reference.empty()) return kExitOk;

  const SampleSet ref = load_samples(reference);
  std::vector<std::string> node_names;
  const MatrixXd nodes = read_matrix_csv(nodes_path, &node_names);
  CsvTable coverage;
  coverage.header = {"param", "coverage_sd", "target", "degenerate"};
  for (const auto& name : mode.at("hyper_names").get<std::vector<std::string>>()) {
    const auto it = std::find(node_names.begin(), node_names.end(), name);
    const auto rit = std::find(ref.names.begin(), ref.names.end(), name);
    if (it == node_names.end() || rit == ref.names.end()) continue;
    const VectorXd col = nodes.col(it - node_names.begin());
    const VectorXd rcol = ref.draws.col(rit - ref.names.begin());
    const CoverageScore score = node_coverage(to_std(col), to_std(rcol));
    coverage.rows.push_back(
        {name, format_double(score.sd), format_double(kCoverageTarget), score.degenerate ? "true" : "false"});
  }
  write_csv(out / "coverage.csv", coverage);
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Adaptive Gauss-Hermite quadrature with PCA grids for latent Gaussian models", "aghq"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for parallel sections")->check(CLI::PositiveNumber);

  std::string levels, nodes_out;
  auto* nodes = app.add_subcommand("nodes", "Emit an unadapted product grid as CSV");
  nodes->add_option("--levels", levels, "Comma-separated levels k1,k2,...")->required();
  nodes->add_option("--out", nodes_out, "Output CSV (default stdout)");

  Flags fit_flags;
  auto* fit = app.add_subcommand("fit", "Optimize, adapt the grid and normalize");
  add_config_flags(fit, fit_flags);

  std::string sample_fit, sample_out;
  int sample_n = 0;
  std::uint64_t sample_seed = 0;
  auto* samp = app.add_subcommand("sample", "Draw from a fitted mixture posterior");
  samp->add_option("--fit", sample_fit, "Directory holding fit artifacts")->required();
  samp->add_option("--n", sample_n, "Number of draws");
  samp->add_option("--seed", sample_seed, "Random seed");
  samp->add_option("--out", sample_out, "Output directory (default: fit directory)");

  Flags mcmc_flags;
  auto* mcmc = app.add_subcommand("mcmc", "Run the adaptive random-walk Metropolis reference");
  add_config_flags(mcmc, mcmc_flags);

  std::string cmp_a, cmp_b, cmp_report;
  auto* cmp = app.add_subcommand("compare", "Compare two sample sets");
  cmp->add_option("--a", cmp_a, "First samples.csv")->required();
  cmp->add_option("--b", cmp_b, "Second samples.csv")->required();
  cmp->add_option("--report", cmp_report, "Output JSON report (default stdout)");

  std::string diag_fit, diag_ref, diag_out;
  auto* diag = app.add_subcommand("diagnose", "Scree and node-coverage diagnostics");
  diag->add_option("--fit", diag_fit, "Directory holding fit artifacts")->required();
  diag->add_option("--reference", diag_ref, "Reference samples.csv for node coverage");
  diag->add_option("--out", diag_out, "Output directory (default: fit directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*nodes) return cmd_nodes(levels, nodes_out);
    if (*fit) return cmd_fit(resolve_config(fit, fit_flags), threads);
    if (*samp) {
      std::optional<int> n;
      std::optional<std::uint64_t> seed;
      std::optional<std::string> out;
      if (samp->count("--n")) n = sample_n;
      if (samp->count("--seed")) seed = sample_seed;
      if (samp->count("--out")) out = sample_out;
      return cmd_sample(sample_fit, n, seed, out);
    }
    if (*mcmc) return cmd_mcmc(resolve_config(mcmc, mcmc_flags), threads);
    if (*cmp) return cmd_compare(cmp_a, cmp_b, cmp_report);
    if (*diag) return cmd_diagnose(diag_fit, diag_ref, diag_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const OptimizerError& e) {
    std::cerr << "optimizer failure: " << e.what() << "\n";
    return kExitOptimizer;
  } catch (const CurvatureError& e) {
    std::cerr << "curvature failure: " << e.what() << "\n";
    return kExitCurvature;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeneric;
  }
  return kExitGeneric;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  storage.insert(storage.begin(), "aghq");
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace aghq::cli

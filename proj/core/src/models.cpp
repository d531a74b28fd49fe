#include "aghq/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aghq/errors.hpp"
#include "aghq/io.hpp"

namespace aghq {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

std::vector<double> json_doubles(const nlohmann::json& config, const char* key, std::vector<double> fallback) {
  if (!config.contains(key)) return fallback;
  try {
    return config.at(key).get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config '") + key + "': " + e.what());
  }
}

void check_keys(const nlohmann::json& config, const std::vector<std::string>& allowed, const std::string& model) {
  if (config.is_null()) return;
  if (!config.is_object()) throw ConfigError(model + ": model config must be a JSON object");
  for (auto it = config.begin(); it != config.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError(model + ": unknown config key '" + it.key() + "'");
}

}  // namespace

// ---------------------------------------------------------------- fig2

Fig2Model::Fig2Model() {
  space_.hyper_names = {"theta1", "theta2"};
  space_.validate();
}

double Fig2Model::log_joint(const VectorXd&, const VectorXd& theta) const {
  return fig2_log_integrand(theta(0), theta(1));
}

// ---------------------------------------------------------------- gauss_conjugate

GaussConjugateModel::GaussConjugateModel(std::vector<double> y, double hyper_prior_sd)
    : y_(std::move(y)), hyper_prior_sd_(hyper_prior_sd) {
  if (y_.empty()) throw ConfigError("gauss_conjugate: at least one observation required");
  if (!(hyper_prior_sd_ > 0.0)) throw ConfigError("gauss_conjugate: hyper_prior_sd must be positive");
  for (double v : y_) {
    sum_y_ += v;
    sum_y2_ += v * v;
  }
  space_.add_latent_block("x", 1);
  space_.hyper_names = {"log_sd"};
  space_.validate();
}

std::unique_ptr<GaussConjugateModel> GaussConjugateModel::from_config(const nlohmann::json& config) {
  check_keys(config, {"y", "hyper_prior_sd"}, "gauss_conjugate");
  auto y = json_doubles(config, "y", {0.8, 1.3, -0.2, 0.5, 1.1});
  const double sd = config.is_object() && config.contains("hyper_prior_sd") ? config["hyper_prior_sd"].get<double>() : 1.0;
  return std::make_unique<GaussConjugateModel>(std::move(y), sd);
}

double GaussConjugateModel::log_joint(const VectorXd& x, const VectorXd& theta) const {
  const double xv = x(0);
  const double n = static_cast<double>(y_.size());
  // sum_i log N(y_i; x, 1)
  const double lik = -0.5 * (sum_y2_ - 2.0 * xv * sum_y_ + n * xv * xv) - 0.5 * n * kLog2Pi;
  return lik + normal_log_pdf(xv, 0.0, std::exp(theta(0))) + normal_log_pdf(theta(0), 0.0, hyper_prior_sd_);
}

VectorXd GaussConjugateModel::latent_gradient(const VectorXd& x, const VectorXd& theta) const {
  const double n = static_cast<double>(y_.size());
  VectorXd g(1);
  g(0) = sum_y_ - n * x(0) - x(0) * std::exp(-2.0 * theta(0));
  return g;
}

MatrixXd GaussConjugateModel::latent_hessian(const VectorXd&, const VectorXd& theta) const {
  MatrixXd h(1, 1);
  h(0, 0) = static_cast<double>(y_.size()) + std::exp(-2.0 * theta(0));
  return h;
}

double GaussConjugateModel::log_marginal(double theta) const {
  // y ~ N(0, I + s^2 1 1^T)
  const double n = static_cast<double>(y_.size());
  const double s2 = std::exp(2.0 * theta);
  const double denom = 1.0 + n * s2;
  const double quad = sum_y2_ - s2 * sum_y_ * sum_y_ / denom;
  return -0.5 * n * kLog2Pi - 0.5 * std::log(denom) - 0.5 * quad + normal_log_pdf(theta, 0.0, hyper_prior_sd_);
}

double GaussConjugateModel::posterior_mean(double theta) const {
  const double s2 = std::exp(2.0 * theta);
  return s2 * sum_y_ / (1.0 + static_cast<double>(y_.size()) * s2);
}

double GaussConjugateModel::posterior_variance(double theta) const {
  return 1.0 / (static_cast<double>(y_.size()) + std::exp(-2.0 * theta));
}

// ---------------------------------------------------------------- gauss_linear

GaussLinearModel::GaussLinearModel(std::vector<double> y, std::vector<double> t) {
  if (y.empty() || y.size() != t.size())
    throw ConfigError("gauss_linear: y and t must be non-empty and of equal length");
  y_ = Eigen::Map<const VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  t_ = Eigen::Map<const VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
  space_.add_latent_block("x", y.size());
  space_.hyper_names = {"intercept", "slope"};
  space_.validate();
}

std::unique_ptr<GaussLinearModel> GaussLinearModel::from_config(const nlohmann::json& config) {
  check_keys(config, {"y", "t"}, "gauss_linear");
  return std::make_unique<GaussLinearModel>(json_doubles(config, "y", {0.3, -0.4, 1.2, 0.9, 2.1, 1.7}),
                                            json_doubles(config, "t", {-1.0, -0.6, -0.2, 0.2, 0.6, 1.0}));
}

double GaussLinearModel::log_joint(const VectorXd& x, const VectorXd& theta) const {
  const auto n = static_cast<double>(y_.size());
  const VectorXd mean = theta(0) + theta(1) * t_.array();
  return -0.5 * (y_ - x).squaredNorm() - 0.5 * (x - mean).squaredNorm() - n * kLog2Pi -
         0.5 * theta.squaredNorm() - kLog2Pi;
}

VectorXd GaussLinearModel::latent_gradient(const VectorXd& x, const VectorXd& theta) const {
  const VectorXd mean = theta(0) + theta(1) * t_.array();
  return (y_ - x) - (x - mean);
}

MatrixXd GaussLinearModel::latent_hessian(const VectorXd&, const VectorXd&) const {
  return 2.0 * MatrixXd::Identity(y_.size(), y_.size());
}

double GaussLinearModel::log_evidence() const {
  const auto n = y_.size();
  MatrixXd design(n, 2);
  design.col(0).setOnes();
  design.col(1) = t_;
  const MatrixXd cov = 2.0 * MatrixXd::Identity(n, n) + design * design.transpose();
  Eigen::LLT<MatrixXd> llt(cov);
  const VectorXd alpha = llt.matrixL().solve(y_);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * static_cast<double>(n) * kLog2Pi - 0.5 * log_det - 0.5 * alpha.squaredNorm();
}

// ---------------------------------------------------------------- mini_elgm

std::filesystem::path default_data_dir() {
#ifdef AGHQ_DEFAULT_DATA_DIR
  return AGHQ_DEFAULT_DATA_DIR;
#else
  return "data";
#endif
}

std::vector<SurveyRow> read_survey_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t c_area = table.column("area_id");
  const std::size_t c_age = table.column("age_group");
  const std::size_t c_sex = table.column("sex");
  const std::size_t c_y = table.column("y");
  const std::size_t c_m = table.column("m_eff");
  std::vector<SurveyRow> rows;
  for (const auto& r : table.rows) {
    SurveyRow row;
    row.area_id = static_cast<std::size_t>(parse_double(r[c_area]));
    row.age_group = static_cast<std::size_t>(parse_double(r[c_age]));
    row.sex = r[c_sex];
    row.y = parse_double(r[c_y]);
    row.m_eff = parse_double(r[c_m]);
    if (row.area_id == 0 || row.age_group == 0)
      throw ConfigError(path.string() + ": area_id and age_group are 1-based");
    if (!(row.y >= 0.0 && row.y <= row.m_eff))
      throw ConfigError(path.string() + ": need 0 <= y <= m_eff");
    rows.push_back(std::move(row));
  }
  return rows;
}

Adjacency read_adjacency_csv(const std::filesystem::path& path, std::size_t n) {
  const CsvTable table = read_csv(path);
  const std::size_t ca = table.column("a");
  const std::size_t cb = table.column("b");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& r : table.rows) {
    const auto a = static_cast<std::size_t>(parse_double(r[ca]));
    const auto b = static_cast<std::size_t>(parse_double(r[cb]));
    if (a == 0 || b == 0) throw ConfigError(path.string() + ": area ids are 1-based");
    edges.emplace_back(a - 1, b - 1);
  }
  return Adjacency::from_edges(n, edges);
}

MiniElgmModel::MiniElgmModel(std::vector<SurveyRow> rows, Adjacency adjacency, bool age_effect, double weight_scale)
    : rows_(std::move(rows)), age_effect_(age_effect) {
  if (rows_.empty()) throw ConfigError("mini_elgm: no survey rows");
  if (!(weight_scale > 0.0)) throw ConfigError("mini_elgm: weight_scale must be positive");
  n_area_ = adjacency.n;
  for (const auto& r : rows_) {
    if (r.area_id > n_area_) throw ConfigError("mini_elgm: area_id beyond adjacency size");
    n_age_ = std::max(n_age_, r.age_group);
  }
  if (age_effect_ && n_age_ < 2) throw ConfigError("mini_elgm: age effect needs at least two age groups");

  const auto nr = static_cast<Eigen::Index>(rows_.size());
  y_.resize(nr);
  m_.resize(nr);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const auto& row = rows_[static_cast<std::size_t>(r)];
    area_.push_back(row.area_id - 1);
    age_.push_back(row.age_group - 1);
    y_(r) = row.y * weight_scale;
    m_(r) = row.m_eff * weight_scale;
    log_binom_const_ += std::lgamma(m_(r) + 1.0) - std::lgamma(y_(r) + 1.0) - std::lgamma(m_(r) - y_(r) + 1.0);
  }

  const PrecisionStructure icar = precision_icar(adjacency, /*scale=*/true);
  icar_ = icar.matrix;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(icar_, Eigen::EigenvaluesOnly);
  double log_pdet = 0.0;
  const double cutoff = 1e-10 * eig.eigenvalues().maxCoeff();
  int rank = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()(i) > cutoff) {
      log_pdet += std::log(eig.eigenvalues()(i));
      ++rank;
    }
  icar_log_norm_ = 0.5 * log_pdet - 0.5 * rank * kLog2Pi;

  space_.add_latent_block("beta0", 1);
  iid_begin_ = space_.latent_names.size();
  space_.add_latent_block("u_iid", n_area_);
  icar_begin_ = space_.latent_names.size();
  space_.add_latent_block("u_icar", n_area_);
  space_.hyper_names = {"log_sigma_x", "logit_phi_x"};
  if (age_effect_) {
    age_begin_ = space_.latent_names.size();
    space_.add_latent_block("age_raw", n_age_);
    space_.hyper_names.push_back("log_sigma_a");
    space_.hyper_names.push_back("logit_phi_a");
  }
  space_.validate();
}

std::unique_ptr<MiniElgmModel> MiniElgmModel::from_config(const nlohmann::json& config, bool age_effect_default) {
  check_keys(config, {"data", "adjacency", "age_effect", "weight_scale"}, "mini_elgm");
  const nlohmann::json cfg = config.is_object() ? config : nlohmann::json::object();
  const std::filesystem::path data = cfg.value("data", (default_data_dir() / "mini_elgm.csv").string());
  const std::filesystem::path adj = cfg.value("adjacency", (default_data_dir() / "mini_elgm_adjacency.csv").string());
  const bool age = cfg.value("age_effect", age_effect_default);
  const double scale = cfg.value("weight_scale", 1.0);

  auto rows = read_survey_csv(data);
  std::size_t n_area = 0;
  for (const auto& r : rows) n_area = std::max(n_area, r.area_id);
  return std::make_unique<MiniElgmModel>(std::move(rows), read_adjacency_csv(adj, n_area), age, scale);
}

MiniElgmModel::Hyper MiniElgmModel::unpack(const VectorXd& theta) const {
  Hyper h;
  h.sigma_x = std::exp(theta(0));
  h.phi_x = logistic(theta(1));
  if (age_effect_) {
    h.sigma_a = std::exp(theta(2));
    h.phi_a = 2.0 * logistic(theta(3)) - 1.0;
    // Keep the AR1 strictly stationary at extreme theta.
    h.phi_a = std::clamp(h.phi_a, -1.0 + 1e-12, 1.0 - 1e-12);
    const MatrixXd cov = constrained_generalized_inverse(precision_ar1(n_age_, h.sigma_a, h.phi_a).matrix);
    Eigen::LLT<MatrixXd> llt(cov);
    h.age_chol = llt.matrixL();
  }
  return h;
}

MatrixXd MiniElgmModel::design(const Hyper& h) const {
  const auto nr = static_cast<Eigen::Index>(rows_.size());
  const auto n = static_cast<Eigen::Index>(space_.latent_dim());
  MatrixXd j = MatrixXd::Zero(nr, n);
  const double a_iid = h.sigma_x * std::sqrt(1.0 - h.phi_x);
  const double a_icar = h.sigma_x * std::sqrt(h.phi_x);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const auto area = static_cast<Eigen::Index>(area_[static_cast<std::size_t>(r)]);
    j(r, 0) = 1.0;
    j(r, static_cast<Eigen::Index>(iid_begin_) + area) = a_iid;
    j(r, static_cast<Eigen::Index>(icar_begin_) + area) = a_icar;
    if (age_effect_) {
      const auto age = static_cast<Eigen::Index>(age_[static_cast<std::size_t>(r)]);
      j.block(r, static_cast<Eigen::Index>(age_begin_), 1, static_cast<Eigen::Index>(n_age_)) = h.age_chol.row(age);
    }
  }
  return j;
}

VectorXd MiniElgmModel::linear_predictor(const VectorXd& x, const Hyper& h) const {
  const auto nr = static_cast<Eigen::Index>(rows_.size());
  const double a_iid = h.sigma_x * std::sqrt(1.0 - h.phi_x);
  const double a_icar = h.sigma_x * std::sqrt(h.phi_x);
  VectorXd age_effect;
  if (age_effect_)
    age_effect = h.age_chol * x.segment(static_cast<Eigen::Index>(age_begin_), static_cast<Eigen::Index>(n_age_));
  VectorXd eta(nr);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const auto area = static_cast<Eigen::Index>(area_[static_cast<std::size_t>(r)]);
    eta(r) = x(0) + a_iid * x(static_cast<Eigen::Index>(iid_begin_) + area) +
             a_icar * x(static_cast<Eigen::Index>(icar_begin_) + area);
    if (age_effect_) eta(r) += age_effect(static_cast<Eigen::Index>(age_[static_cast<std::size_t>(r)]));
  }
  return eta;
}

double MiniElgmModel::log_joint(const VectorXd& x, const VectorXd& theta) const {
  const Hyper h = unpack(theta);
  const VectorXd eta = linear_predictor(x, h);

  // Generalised binomial likelihood on the logit scale:
  // y log p + (m - y) log(1 - p) = y eta - m log(1 + e^eta).
  double ll = log_binom_const_;
  for (Eigen::Index r = 0; r < eta.size(); ++r) ll += y_(r) * eta(r) - m_(r) * softplus(eta(r));

  const auto na = static_cast<Eigen::Index>(n_area_);
  const auto v = x.segment(static_cast<Eigen::Index>(iid_begin_), na);
  const auto w = x.segment(static_cast<Eigen::Index>(icar_begin_), na);

  double lp = normal_log_pdf(x(0), 0.0, 5.0);
  lp += -0.5 * v.squaredNorm() - 0.5 * static_cast<double>(na) * kLog2Pi;
  lp += icar_log_norm_ - 0.5 * w.dot(icar_ * w) + normal_log_pdf(w.sum(), 0.0, constraint_sd());
  if (age_effect_) {
    const auto z = x.segment(static_cast<Eigen::Index>(age_begin_), static_cast<Eigen::Index>(n_age_));
    lp += -0.5 * z.squaredNorm() - 0.5 * static_cast<double>(n_age_) * kLog2Pi;
  }

  // Hyperpriors on the unconstrained scale, Jacobians included:
  // sigma ~ N+(0, 2.5), phi_x ~ Beta(0.5, 0.5), phi_a ~ U(-1, 1).
  double lh = std::log(2.0) + normal_log_pdf(h.sigma_x, 0.0, 2.5) + theta(0);
  const double log_phi = -softplus(-theta(1));
  const double log_1m_phi = -softplus(theta(1));
  lh += -0.5 * log_phi - 0.5 * log_1m_phi - std::log(std::numbers::pi) + log_phi + log_1m_phi;
  if (age_effect_) {
    lh += std::log(2.0) + normal_log_pdf(h.sigma_a, 0.0, 2.5) + theta(2);
    lh += -softplus(-theta(3)) - softplus(theta(3));
  }
  return ll + lp + lh;
}

VectorXd MiniElgmModel::latent_gradient(const VectorXd& x, const VectorXd& theta) const {
  const Hyper h = unpack(theta);
  const VectorXd eta = linear_predictor(x, h);
  VectorXd resid(eta.size());
  for (Eigen::Index r = 0; r < eta.size(); ++r) resid(r) = y_(r) - m_(r) * logistic(eta(r));

  VectorXd g = design(h).transpose() * resid;
  const auto na = static_cast<Eigen::Index>(n_area_);
  const auto ib = static_cast<Eigen::Index>(iid_begin_);
  const auto cb = static_cast<Eigen::Index>(icar_begin_);
  g(0) -= x(0) / 25.0;
  g.segment(ib, na) -= x.segment(ib, na);
  const VectorXd w = x.segment(cb, na);
  const double c2 = constraint_sd() * constraint_sd();
  g.segment(cb, na) -= icar_ * w + VectorXd::Constant(na, w.sum() / c2);
  if (age_effect_) {
    const auto ab = static_cast<Eigen::Index>(age_begin_);
    const auto nage = static_cast<Eigen::Index>(n_age_);
    g.segment(ab, nage) -= x.segment(ab, nage);
  }
  return g;
}

MatrixXd MiniElgmModel::latent_hessian(const VectorXd& x, const VectorXd& theta) const {
  const Hyper h = unpack(theta);
  const VectorXd eta = linear_predictor(x, h);
  VectorXd curv(eta.size());
  for (Eigen::Index r = 0; r < eta.size(); ++r) {
    const double p = logistic(eta(r));
    curv(r) = m_(r) * p * (1.0 - p);
  }
  const MatrixXd j = design(h);
  MatrixXd hess = j.transpose() * curv.asDiagonal() * j;

  const auto na = static_cast<Eigen::Index>(n_area_);
  const auto ib = static_cast<Eigen::Index>(iid_begin_);
  const auto cb = static_cast<Eigen::Index>(icar_begin_);
  hess(0, 0) += 1.0 / 25.0;
  hess.block(ib, ib, na, na).diagonal().array() += 1.0;
  const double c2 = constraint_sd() * constraint_sd();
  hess.block(cb, cb, na, na) += icar_ + MatrixXd::Constant(na, na, 1.0 / c2);
  if (age_effect_) {
    const auto ab = static_cast<Eigen::Index>(age_begin_);
    const auto nage = static_cast<Eigen::Index>(n_age_);
    hess.block(ab, ab, nage, nage).diagonal().array() += 1.0;
  }
  return 0.5 * (hess + hess.transpose());
}

std::vector<std::string> MiniElgmModel::output_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_area_; ++i) names.push_back("rho[" + std::to_string(i + 1) + "]");
  return names;
}

VectorXd MiniElgmModel::output_map(const VectorXd& x, const VectorXd& theta) const {
  // Area prevalence: effective-sample-size weighted mean over the area's
  // strata of the inverse-logit linear predictor.
  const Hyper h = unpack(theta);
  const VectorXd eta = linear_predictor(x, h);
  std::vector<std::vector<double>> values(n_area_), weights(n_area_);
  for (Eigen::Index r = 0; r < eta.size(); ++r) {
    const std::size_t a = area_[static_cast<std::size_t>(r)];
    values[a].push_back(logistic(eta(r)));
    weights[a].push_back(m_(r));
  }
  VectorXd out(static_cast<Eigen::Index>(n_area_));
  for (std::size_t a = 0; a < n_area_; ++a) {
    if (values[a].empty()) {
      // Unobserved area: prevalence at its linear predictor alone.
      const double a_iid = h.sigma_x * std::sqrt(1.0 - h.phi_x);
      const double a_icar = h.sigma_x * std::sqrt(h.phi_x);
      out(static_cast<Eigen::Index>(a)) =
          logistic(x(0) + a_iid * x(static_cast<Eigen::Index>(iid_begin_ + a)) +
                   a_icar * x(static_cast<Eigen::Index>(icar_begin_ + a)));
    } else {
      out(static_cast<Eigen::Index>(a)) = weighted_mean(values[a], weights[a]);
    }
  }
  return out;
}

// ---------------------------------------------------------------- registry

std::vector<std::string> builtin_model_names() {
  return {"fig2", "gauss_conjugate", "gauss_linear", "mini_elgm", "mini_elgm_age"};
}

std::unique_ptr<LogJointModel> make_model(const std::string& name, const nlohmann::json& config) {
  if (name == "fig2") {
    check_keys(config, {}, "fig2");
    return std::make_unique<Fig2Model>();
  }
  if (name == "gauss_conjugate") return GaussConjugateModel::from_config(config);
  if (name == "gauss_linear") return GaussLinearModel::from_config(config);
  if (name == "mini_elgm") return MiniElgmModel::from_config(config, false);
  if (name == "mini_elgm_age") return MiniElgmModel::from_config(config, true);
  throw ConfigError("unknown model '" + name + "'");
}

}  // namespace aghq

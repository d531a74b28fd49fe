#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aghq/model_api.hpp"
#include "aghq/model_library.hpp"

namespace aghq {

/// Two-dimensional skew-normal product with no latent field (N = 0, m = 2).
/// Its integral over R^2 is exactly 4.
class Fig2Model final : public LogJointModel {
 public:
  Fig2Model();
  std::string name() const override { return "fig2"; }
  const ParameterSpace& space() const override { return space_; }
  double log_joint(const VectorXd& x, const VectorXd& theta) const override;

 private:
  ParameterSpace space_;
};

/// y_i | x ~ N(x, 1), x | theta ~ N(0, exp(theta)^2), theta ~ N(0, prior_sd^2).
///
/// Config: {"y": [...], "hyper_prior_sd": 1.0}.
class GaussConjugateModel final : public LogJointModel {
 public:
  explicit GaussConjugateModel(std::vector<double> y, double hyper_prior_sd = 1.0);
  static std::unique_ptr<GaussConjugateModel> from_config(const nlohmann::json& config);

  std::string name() const override { return "gauss_conjugate"; }
  const ParameterSpace& space() const override { return space_; }
  double log_joint(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd latent_gradient(const VectorXd& x, const VectorXd& theta) const override;
  MatrixXd latent_hessian(const VectorXd& x, const VectorXd& theta) const override;

  // log p(y | theta) + log p(theta), exact.
  double log_marginal(double theta) const;
  // E[x | y, theta], exact.
  double posterior_mean(double theta) const;
  double posterior_variance(double theta) const;

  const std::vector<double>& data() const { return y_; }

 private:
  std::vector<double> y_;
  double sum_y_ = 0.0;
  double sum_y2_ = 0.0;
  double hyper_prior_sd_;
  ParameterSpace space_;
};

/// Jointly Gaussian model with a latent field: y_i | x_i ~ N(x_i, 1),
/// x_i | theta ~ N(theta_1 + theta_2 t_i, 1), theta ~ N(0, I_2). The log joint
/// is quadratic in (x, theta), so p(y) is available in closed form.
///
/// Config: {"y": [...], "t": [...]}.
class GaussLinearModel final : public LogJointModel {
 public:
  GaussLinearModel(std::vector<double> y, std::vector<double> t);
  static std::unique_ptr<GaussLinearModel> from_config(const nlohmann::json& config);

  std::string name() const override { return "gauss_linear"; }
  const ParameterSpace& space() const override { return space_; }
  double log_joint(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd latent_gradient(const VectorXd& x, const VectorXd& theta) const override;
  MatrixXd latent_hessian(const VectorXd& x, const VectorXd& theta) const override;

  // log p(y) with y ~ N(0, 2 I + T T^T).
  double log_evidence() const;

 private:
  VectorXd y_;
  VectorXd t_;
  ParameterSpace space_;
};

struct SurveyRow {
  std::size_t area_id = 0;  // 1-based in files
  std::size_t age_group = 0;
  std::string sex;
  double y = 0.0;
  double m_eff = 0.0;
};

std::vector<SurveyRow> read_survey_csv(const std::filesystem::path& path);
// Edge list `a,b` with 1-based area ids; n is the number of areas.
Adjacency read_adjacency_csv(const std::filesystem::path& path, std::size_t n);

std::filesystem::path default_data_dir();

/// Binomial survey counts on a small district graph with a logit link.
/// eta = beta0 + BYM2(u_iid, u_icar; sigma_x, phi_x) [+ AR1 age effect].
///
/// Latent blocks: beta0, u_iid, u_icar [, age_raw]; the age effect is
/// non-centred (a = C z with C C^T the AR1 covariance).
/// Hyperparameters: log_sigma_x, logit_phi_x [, log_sigma_a, logit_phi_a],
/// where phi_a = 2 logistic(t) - 1.
///
/// Config: {"data": path, "adjacency": path, "age_effect": bool,
///          "weight_scale": number}.
class MiniElgmModel final : public LogJointModel {
 public:
  MiniElgmModel(std::vector<SurveyRow> rows, Adjacency adjacency, bool age_effect, double weight_scale = 1.0);
  static std::unique_ptr<MiniElgmModel> from_config(const nlohmann::json& config, bool age_effect_default);

  std::string name() const override { return age_effect_ ? "mini_elgm_age" : "mini_elgm"; }
  const ParameterSpace& space() const override { return space_; }
  double log_joint(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd latent_gradient(const VectorXd& x, const VectorXd& theta) const override;
  MatrixXd latent_hessian(const VectorXd& x, const VectorXd& theta) const override;
  std::vector<std::string> output_names() const override;
  VectorXd output_map(const VectorXd& x, const VectorXd& theta) const override;

  std::size_t area_count() const { return n_area_; }
  std::size_t age_count() const { return n_age_; }
  const MatrixXd& scaled_icar() const { return icar_; }

  // Standard deviation of the soft sum-to-zero term on u_icar.
  double constraint_sd() const { return 0.001 * static_cast<double>(n_area_); }

 private:
  struct Hyper {
    double sigma_x, phi_x;
    double sigma_a = 0.0, phi_a = 0.0;
    MatrixXd age_chol;  // lower Cholesky factor of the AR1 covariance
  };
  Hyper unpack(const VectorXd& theta) const;
  MatrixXd design(const Hyper& h) const;  // rows x N, d eta / d x
  VectorXd linear_predictor(const VectorXd& x, const Hyper& h) const;

  std::vector<SurveyRow> rows_;
  std::vector<std::size_t> area_;  // 0-based per row
  std::vector<std::size_t> age_;   // 0-based per row
  VectorXd y_, m_;
  double log_binom_const_ = 0.0;
  bool age_effect_;
  std::size_t n_area_ = 0;
  std::size_t n_age_ = 0;
  MatrixXd icar_;
  double icar_log_norm_ = 0.0;
  ParameterSpace space_;
  std::size_t iid_begin_ = 0, icar_begin_ = 0, age_begin_ = 0;
};

// Built-in model registry.
std::vector<std::string> builtin_model_names();
std::unique_ptr<LogJointModel> make_model(const std::string& name,
                                          const nlohmann::json& config = nlohmann::json::object());

}  // namespace aghq

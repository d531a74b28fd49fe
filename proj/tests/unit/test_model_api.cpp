#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "aghq/errors.hpp"
#include "aghq/model_api.hpp"
#include "aghq/models.hpp"
#include "test_models.hpp"

using namespace aghq;

TEST(FdGradient, Square) {
  const auto g = fd_gradient([](const VectorXd& x) { return x(0) * x(0); }, VectorXd::Constant(1, 3.0));
  EXPECT_NEAR(g(0), 6.0, 1e-6);
}

TEST(FdGradient, ConstantIsZero) {
  const auto g = fd_gradient([](const VectorXd&) { return 2.5; }, VectorXd::Ones(3));
  EXPECT_TRUE(g.isZero());
}

TEST(FdGradient, Exponential) {
  const auto g = fd_gradient([](const VectorXd& x) { return std::exp(x(0) + 2.0 * x(1)); }, VectorXd::Zero(2));
  EXPECT_NEAR(g(0), 1.0, 1e-5);
  EXPECT_NEAR(g(1), 2.0, 1e-5);
}

TEST(FdGradient, ReportsNonFiniteCoordinate) {
  const ScalarFunction f = [](const VectorXd& x) { return x(1) > 0.0 ? std::log(-1.0) : 0.0; };
  try {
    fd_gradient(f, VectorXd::Zero(2));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(FdHessian, HalfSquare) {
  const auto h = fd_hessian([](const VectorXd& x) { return 0.5 * x(0) * x(0); }, VectorXd::Constant(1, 0.7));
  EXPECT_NEAR(h(0, 0), 1.0, 1e-4);
}

TEST(FdHessian, CrossTerm) {
  const auto h = fd_hessian([](const VectorXd& x) { return x(0) * x(1); }, VectorXd::Zero(2));
  EXPECT_NEAR(h(0, 1), 1.0, 1e-4);
  EXPECT_NEAR(h(1, 0), 1.0, 1e-4);
  EXPECT_EQ(h(0, 1), h(1, 0));
}

TEST(FdHessian, LinearIsZero) {
  const auto h = fd_hessian([](const VectorXd& x) { return 3.0 * x(0) - 2.0 * x(1) + 1.0; }, VectorXd::Ones(2));
  EXPECT_LT(h.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(StepRule, ScalesWithMagnitude) {
  const StepRule r;
  EXPECT_DOUBLE_EQ(r.step(0.1), r.scale);
  EXPECT_DOUBLE_EQ(r.step(-10.0), 10.0 * r.scale);
}

TEST(ParameterSpace, BlocksAndNames) {
  ParameterSpace s;
  s.add_latent_block("beta0", 1);
  s.add_latent_block("u", 3);
  s.hyper_names = {"log_sigma"};
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.latent_names, (std::vector<std::string>{"beta0", "u[1]", "u[2]", "u[3]"}));
  ASSERT_EQ(s.latent_blocks.size(), 2u);
  EXPECT_EQ(s.latent_blocks[1].begin, 1u);
  EXPECT_EQ(s.latent_blocks[1].end, 4u);
}

TEST(ParameterSpace, RejectsDuplicatesAndMissingHyper) {
  ParameterSpace s;
  s.add_latent_block("u", 2);
  EXPECT_THROW(s.validate(), ConfigError);
  s.hyper_names = {"a", "a"};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(ValidateModel, GaussianToyPasses) {
  GaussConjugateModel model({0.8, 1.3, -0.2});
  const ValidationReport r = validate_model(model, 5, 11);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_gradient_error, 1e-4);
}

TEST(ValidateModel, WrongGradientSignIsFlagged) {
  GaussConjugateModel model({0.8, 1.3, -0.2});
  testing_models::WrongGradientModel wrong(model);
  const ValidationReport r = validate_model(wrong, 5, 11);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_gradient_error, 1e-4);
}

TEST(ValidateModel, MiniElgmPasses) {
  const auto model = make_model("mini_elgm");
  const ValidationReport r = validate_model(*model, 5, 3);
  EXPECT_TRUE(r.passed) << r.max_gradient_error << " " << r.max_hessian_error;
  for (const auto& b : r.blocks) EXPECT_TRUE(b.passed) << b.block;
  EXPECT_EQ(r.max_asymmetry, 0.0);
}

TEST(ValidateModel, DefaultFiniteDifferenceDerivativesAreConsistent) {
  testing_models::FdOnlyGaussModel model(VectorXd::LinSpaced(4, -1.0, 1.0));
  const VectorXd x = VectorXd::Constant(4, 0.3);
  const VectorXd t = VectorXd::Constant(1, -0.2);
  const VectorXd g = model.latent_gradient(x, t);
  const MatrixXd h = model.latent_hessian(x, t);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double exact = -(x(i) - (-1.0 + 2.0 * i / 3.0)) - (x(i) - t(0));
    EXPECT_NEAR(g(i), exact, 1e-7);
    EXPECT_NEAR(h(i, i), 2.0, 1e-5);
  }
  EXPECT_TRUE(h.isApprox(h.transpose()));
}

TEST(BuiltinModels, LogJointDecreasesAlongRandomRays) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  for (const auto& name : builtin_model_names()) {
    const auto model = make_model(name);
    const auto nx = static_cast<Eigen::Index>(model->latent_dim());
    const auto m = static_cast<Eigen::Index>(model->hyper_dim());
    const VectorXd theta = VectorXd::Zero(m);
    if (nx == 0) continue;
    for (int ray = 0; ray < 10; ++ray) {
      VectorXd dir(nx);
      for (Eigen::Index i = 0; i < nx; ++i) dir(i) = n(rng);
      dir.normalize();
      double prev = model->log_joint(VectorXd::Zero(nx), theta);
      ASSERT_TRUE(std::isfinite(prev)) << name;
      const double far = model->log_joint(1e3 * dir, theta);
      EXPECT_LT(far, prev) << name;
      // Eventually strictly decreasing.
      double last = model->log_joint(20.0 * dir, theta);
      for (double r = 40.0; r <= 640.0; r *= 2.0) {
        const double v = model->log_joint(r * dir, theta);
        EXPECT_LT(v, last) << name << " r=" << r;
        last = v;
      }
    }
  }
}

TEST(BudgetedModel, CountsAndStops) {
  GaussConjugateModel model({1.0});
  EvaluationBudget budget;
  budget.max_log_joint_calls = 3;
  BudgetedModel b(model, budget);
  const VectorXd x = VectorXd::Zero(1), t = VectorXd::Zero(1);
  b.log_joint(x, t);
  b.log_joint(x, t);
  b.log_joint(x, t);
  EXPECT_EQ(b.calls(), 3u);
  EXPECT_THROW(b.log_joint(x, t), OptimizerError);
}

TEST(EvaluationBudget, RejectsZero) {
  EvaluationBudget b;
  b.max_log_joint_calls = 0;
  EXPECT_THROW(b.validate(), ConfigError);
}

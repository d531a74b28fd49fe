#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include <gtest/gtest.h>

#include "aghq/errors.hpp"
#include "aghq/ghq_rules.hpp"
#include "oracles.hpp"

using namespace aghq;

TEST(HermiteEval, ZeroOrderIsOne) { EXPECT_DOUBLE_EQ(hermite_eval(0, 7.3), 1.0); }

TEST(HermiteEval, SecondOrderAtZero) { EXPECT_DOUBLE_EQ(hermite_eval(2, 0.0), -1.0); }

TEST(HermiteEval, ThirdOrderAtTwo) { EXPECT_DOUBLE_EQ(hermite_eval(3, 2.0), 2.0); }

TEST(HermiteEval, MatchesClosedFormsOnRange) {
  for (double z = -3.0; z <= 3.0; z += 0.25) {
    EXPECT_NEAR(hermite_eval(1, z), z, 1e-14);
    EXPECT_NEAR(hermite_eval(4, z), z * z * z * z - 6 * z * z + 3, 1e-12);
  }
}

TEST(UnivariateRule, LevelOneIsRootTwoPi) {
  const UnivariateRule r = univariate_rule(1);
  ASSERT_EQ(r.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(r.nodes[0], 0.0);
  // 1! / (He_2(0)^2 phi(0))
  const double oracle_weight = 1.0 / (std::pow(hermite_eval(2, 0.0), 2) * oracle::std_normal_pdf(0.0));
  EXPECT_NEAR(r.weights[0], oracle_weight, 1e-14);
  EXPECT_NEAR(r.weights[0], 2.5066283, 1e-7);
}

TEST(UnivariateRule, LevelThreeClosedForm) {
  const UnivariateRule r = univariate_rule(3);
  ASSERT_EQ(r.nodes.size(), 3u);
  EXPECT_NEAR(r.nodes[0], -std::sqrt(3.0), 1e-13);
  EXPECT_NEAR(r.nodes[1], 0.0, 1e-14);
  EXPECT_NEAR(r.nodes[2], std::sqrt(3.0), 1e-13);
  const oracle::GaussRule gw = oracle::golub_welsch(3);
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(r.weights[i], gw.prob_weights[i] / oracle::std_normal_pdf(gw.nodes[i]), 1e-12);
  // (1/6) / phi(sqrt 3) = 1.87232..., (2/3) / phi(0) = 1.67109...
  EXPECT_NEAR(r.weights[0], 1.8723, 5e-5);
  EXPECT_NEAR(r.weights[1], 1.6711, 5e-5);
  EXPECT_NEAR(r.weights[2], 1.8723, 5e-5);
}

TEST(UnivariateRule, LevelTwoClosedForm) {
  const UnivariateRule r = univariate_rule(2);
  EXPECT_NEAR(r.nodes[0], -1.0, 1e-14);
  EXPECT_NEAR(r.nodes[1], 1.0, 1e-14);
  EXPECT_NEAR(r.weights[0], 0.5 / oracle::std_normal_pdf(1.0), 1e-13);
  EXPECT_NEAR(r.weights[0], 2.0664, 5e-5);
  EXPECT_DOUBLE_EQ(r.weights[0], r.weights[1]);
}

TEST(UnivariateRule, AgreesWithGolubWelschOracleUpToCap) {
  for (int k = 1; k <= kMaxRuleLevel; ++k) {
    const UnivariateRule r = univariate_rule(k);
    const oracle::GaussRule gw = oracle::golub_welsch(k);
    for (int i = 0; i < k; ++i) {
      EXPECT_NEAR(r.nodes[i], gw.nodes[i], 1e-9 * std::max(1.0, std::abs(gw.nodes[i]))) << "k=" << k;
      const double prob = r.weights[i] * oracle::std_normal_pdf(r.nodes[i]);
      EXPECT_NEAR(prob, gw.prob_weights[i], 1e-9 * std::max(gw.prob_weights[i], 1e-300) + 1e-15) << "k=" << k;
    }
  }
}

TEST(UnivariateRule, SymmetricPositiveAscendingAndNormalized) {
  for (int k = 1; k <= kMaxRuleLevel; ++k) {
    const UnivariateRule r = univariate_rule(k);
    ASSERT_EQ(static_cast<int>(r.nodes.size()), k);
    double mass = 0.0;
    for (int i = 0; i < k; ++i) {
      EXPECT_GT(r.weights[i], 0.0);
      EXPECT_EQ(r.nodes[i], -r.nodes[k - 1 - i]);
      EXPECT_EQ(r.weights[i], r.weights[k - 1 - i]);
      if (i > 0) EXPECT_LT(r.nodes[i - 1], r.nodes[i]);
      mass += r.weights[i] * oracle::std_normal_pdf(r.nodes[i]);
    }
    EXPECT_NEAR(mass, 1.0, 1e-12) << "k=" << k;
  }
}

TEST(UnivariateRule, PolynomialExactness) {
  for (int k = 1; k <= 10; ++k) {
    const UnivariateRule r = univariate_rule(k);
    for (int p = 0; p <= 2 * k - 1; ++p) {
      const double sum = oracle::rule_moment(r.nodes, r.weights, p);
      EXPECT_NEAR(sum, oracle::gaussian_moment(p), 1e-10 * std::max(1.0, oracle::gaussian_moment(p)))
          << "k=" << k << " p=" << p;
    }
  }
}

TEST(UnivariateRule, RejectsOutOfRangeLevels) {
  EXPECT_THROW(univariate_rule(0), ConfigError);
  EXPECT_THROW(univariate_rule(kMaxRuleLevel + 1), ConfigError);
}

TEST(ProductGrid, CountsPoints) {
  EXPECT_EQ(product_grid(GridSpec{{3, 3}}).size(), 9u);
  const QuadratureGrid g = product_grid(GridSpec{{3, 1}});
  ASSERT_EQ(g.size(), 3u);
  for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(g.points(static_cast<Eigen::Index>(p), 1), 0.0);
}

TEST(ProductGrid, AllLevelOneIsOriginWithProductWeight) {
  const QuadratureGrid g = product_grid(GridSpec{{1, 1, 1}});
  ASSERT_EQ(g.size(), 1u);
  EXPECT_TRUE(g.points.isZero());
  EXPECT_NEAR(g.weights[0], std::pow(2.0 * std::numbers::pi, 1.5), 1e-12);
}

TEST(ProductGrid, LexicographicWithFirstDimensionSlowest) {
  const QuadratureGrid g = product_grid(GridSpec{{2, 3}});
  const UnivariateRule r2 = univariate_rule(2), r3 = univariate_rule(3);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b) {
      const Eigen::Index p = a * 3 + b;
      EXPECT_EQ(g.points(p, 0), r2.nodes[a]);
      EXPECT_EQ(g.points(p, 1), r3.nodes[b]);
      EXPECT_NEAR(g.weights[static_cast<std::size_t>(p)], r2.weights[a] * r3.weights[b], 1e-13);
    }
}

TEST(ProductGrid, ColumnsUseOnlyTheirRuleNodesAndMassIsOne) {
  const GridSpec specs[] = {GridSpec{{2}}, GridSpec{{3, 5}}, GridSpec{{4, 1, 2}}, GridSpec{{7, 7}},
                            GridSpec{{3, 3, 3, 3}}};
  for (const auto& spec : specs) {
    const QuadratureGrid g = product_grid(spec);
    double mass = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      double phi = 1.0;
      for (std::size_t j = 0; j < g.dim; ++j) phi *= oracle::std_normal_pdf(g.points(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)));
      mass += g.weights[p] * phi;
    }
    EXPECT_NEAR(mass, 1.0, 1e-10);
    for (std::size_t j = 0; j < g.dim; ++j) {
      const UnivariateRule r = univariate_rule(spec.levels[j]);
      for (std::size_t p = 0; p < g.size(); ++p) {
        const double v = g.points(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j));
        EXPECT_NE(std::find(r.nodes.begin(), r.nodes.end(), v), r.nodes.end());
      }
    }
  }
}

TEST(ProductGrid, LogWeightsMatchWeights) {
  const QuadratureGrid g = product_grid(GridSpec{{5, 4}});
  for (std::size_t p = 0; p < g.size(); ++p) EXPECT_NEAR(std::exp(g.log_weights[p]), g.weights[p], 1e-12 * g.weights[p]);
}

TEST(ProductGrid, EnforcesPointBudget) {
  EXPECT_THROW(product_grid(GridSpec{{10, 10}}, 99), ConfigError);
  EXPECT_NO_THROW(product_grid(GridSpec{{10, 10}}, 100));
}

TEST(GridSpec, ValidatesLevels) {
  EXPECT_THROW((GridSpec{{0, 2}}.validate()), ConfigError);
  EXPECT_THROW(GridSpec{{}}.validate(), ConfigError);
  EXPECT_EQ(GridSpec::pca(4, 2, 3).levels, (std::vector<int>{3, 3, 1, 1}));
  EXPECT_TRUE(GridSpec::uniform(3, 5).is_uniform());
  EXPECT_FALSE(GridSpec::pca(3, 1, 5).is_uniform());
  EXPECT_EQ((GridSpec{{3, 4, 5}}.point_count()), 60u);
}

TEST(PointBudget, ReadsEnvironment) {
  ::setenv("AGHQ_POINT_BUDGET", "1234", 1);
  EXPECT_EQ(point_budget_from_env(), 1234u);
  ::unsetenv("AGHQ_POINT_BUDGET");
  EXPECT_EQ(point_budget_from_env(), kDefaultPointBudget);
}

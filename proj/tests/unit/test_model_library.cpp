#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "aghq/errors.hpp"
#include "aghq/model_library.hpp"
#include "aghq/models.hpp"
#include "oracles.hpp"

using namespace aghq;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Adjacency path3() { return Adjacency::from_edges(3, {{0, 1}, {1, 2}}); }

double min_eigenvalue(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues().minCoeff();
}

}  // namespace

TEST(PrecisionAr1, IndependenceIsIdentity) {
  const auto p = precision_ar1(2, 1.0, 0.0);
  EXPECT_TRUE(p.matrix.isApprox(MatrixXd::Identity(2, 2), 1e-15));
  EXPECT_EQ(p.rank_deficiency, 0);
}

TEST(PrecisionAr1, StationaryUnitVariance) {
  const MatrixXd inv = precision_ar1(3, 1.0, 0.5).matrix.inverse();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(inv(i, i), 1.0, 1e-10);
  EXPECT_NEAR(inv(0, 1), 0.5, 1e-10);
  EXPECT_NEAR(inv(0, 2), 0.25, 1e-10);
}

TEST(PrecisionAr1, MarginalVarianceIsSigmaSquared) {
  const MatrixXd inv = precision_ar1(2, 2.0, 0.9).matrix.inverse();
  EXPECT_NEAR(inv(0, 0), 4.0, 1e-10);
  EXPECT_NEAR(inv(1, 1), 4.0, 1e-10);
}

TEST(PrecisionAr1, RejectsUnitRoot) {
  EXPECT_THROW(precision_ar1(3, 1.0, 1.0), ConfigError);
  EXPECT_THROW(precision_ar1(3, 1.0, -1.2), ConfigError);
}

TEST(PrecisionIcar, PathLaplacian) {
  const auto p = precision_icar(path3(), false);
  MatrixXd expected(3, 3);
  expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  EXPECT_TRUE(p.matrix.isApprox(expected));
  EXPECT_EQ(p.rank_deficiency, 1);
}

TEST(PrecisionIcar, RowSumsVanish) {
  for (bool scale : {false, true}) {
    const auto p = precision_icar(Adjacency::grid(4, 3), scale);
    EXPECT_LT(p.matrix.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PrecisionIcar, ScaledGeometricMeanVarianceIsOne) {
  const auto p = precision_icar(path3(), true);
  // Independent generalized inverse under the sum-to-zero constraint:
  // (Q + 11^T/n)^-1 - 11^T/n.
  const MatrixXd ones = MatrixXd::Constant(3, 3, 1.0 / 3.0);
  const MatrixXd ginv = (p.matrix + ones).inverse() - ones;
  double log_sum = 0.0;
  for (int i = 0; i < 3; ++i) log_sum += std::log(ginv(i, i));
  EXPECT_NEAR(std::exp(log_sum / 3.0), 1.0, 1e-8);
}

TEST(PrecisionIcar, RankDeficiencyPerComponent) {
  const Adjacency two = Adjacency::from_edges(4, {{0, 1}, {2, 3}});
  EXPECT_EQ(two.component_count(), 2u);
  EXPECT_EQ(precision_icar(two, false).rank_deficiency, 2);
}

TEST(PrecisionIcar, RejectsEmptyEdgeSet) {
  EXPECT_THROW(precision_icar(Adjacency::from_edges(3, {}), false), ConfigError);
}

TEST(Adjacency, RejectsSelfLoopsAndDeduplicates) {
  EXPECT_THROW(Adjacency::from_edges(3, {{1, 1}}), ConfigError);
  const Adjacency a = Adjacency::from_edges(3, {{0, 1}, {1, 0}, {2, 1}});
  EXPECT_EQ(a.edges.size(), 2u);
  EXPECT_EQ(a.degrees(), (std::vector<std::size_t>{1, 2, 1}));
}

TEST(Adjacency, GridHasRookEdges) {
  const Adjacency g = Adjacency::grid(4, 3);
  EXPECT_EQ(g.n, 12u);
  EXPECT_EQ(g.edges.size(), 17u);  // 4*2 + 3*3
  EXPECT_EQ(g.component_count(), 1u);
}

TEST(PrecisionBuilders, SymmetricAndPositiveSemidefinite) {
  const PrecisionStructure all[] = {precision_iid(4, 0.7), precision_ar1(5, 1.3, -0.4),
                                    precision_icar(Adjacency::grid(3, 3), false),
                                    precision_icar(Adjacency::grid(3, 3), true)};
  for (const auto& p : all) {
    EXPECT_TRUE(p.matrix.isApprox(p.matrix.transpose()));
    EXPECT_GE(min_eigenvalue(p.matrix), -1e-10);
  }
}

TEST(Bym2, Endpoints) {
  const VectorXd v = VectorXd::LinSpaced(4, -1, 2), w = VectorXd::LinSpaced(4, 3, 0);
  EXPECT_EQ(bym2_effect(v, w, 1.7, 0.0), 1.7 * v);
  EXPECT_EQ(bym2_effect(v, w, 1.7, 1.0), 1.7 * w);
}

TEST(Bym2, HalfMix) {
  const VectorXd e = bym2_effect(VectorXd::Ones(3), VectorXd::Ones(3), 1.0, 0.5);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(e(i), std::sqrt(2.0), 1e-12);
}

TEST(KishEss, Cases) {
  EXPECT_DOUBLE_EQ(kish_ess({2.0, 2.0, 2.0, 2.0}), 4.0);
  EXPECT_NEAR(kish_ess({1, 1, 2}), 16.0 / 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(kish_ess({1, 0, 0}), 1.0);
  EXPECT_THROW(kish_ess({0, 0}), ConfigError);
}

TEST(WeightedMean, Cases) {
  EXPECT_DOUBLE_EQ(weighted_mean({1, 2, 6}, {1, 1, 1}), 3.0);
  EXPECT_DOUBLE_EQ(weighted_mean({0, 1}, {1, 3}), 0.75);
  EXPECT_DOUBLE_EQ(weighted_mean({4.2}, {0.3}), 4.2);
  EXPECT_THROW(weighted_mean({1, 2}, {0, 0}), ConfigError);
}

TEST(Xbin, IntegerCaseMatchesBinomial) {
  EXPECT_NEAR(xbin_log_density(3, 10, 0.4), oracle::binomial_log_pmf(3, 10, 0.4), 1e-12);
  EXPECT_NEAR(xbin_log_density(3, 10, 0.4), -1.5371598, 1e-6);
}

TEST(Xbin, AllSuccesses) { EXPECT_NEAR(xbin_log_density(6.5, 6.5, 0.3), 6.5 * std::log(0.3), 1e-12); }

TEST(Xbin, RealCountsMatchHighPrecisionOracle) {
  const double v = xbin_log_density(2.5, 7.2, 0.3);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, oracle::xbin_high_precision(2.5, 7.2, 0.3), 1e-12);
  EXPECT_NEAR(xbin_log_density(13.97, 59.9, 0.12), oracle::xbin_high_precision(13.97, 59.9, 0.12), 1e-11);
}

TEST(Xbin, IntegerGridEqualsBinomialLogPmf) {
  for (double p : {0.1, 0.5, 0.9})
    for (int m = 0; m <= 30; ++m)
      for (int y = 0; y <= m; ++y)
        EXPECT_NEAR(xbin_log_density(y, m, p), oracle::binomial_log_pmf(y, m, p), 1e-10) << y << "/" << m;
}

TEST(Xbin, RejectsInvalid) {
  EXPECT_THROW(xbin_log_density(5, 4, 0.5), ConfigError);
  EXPECT_THROW(xbin_log_density(1, 4, 0.0), ConfigError);
  EXPECT_THROW(xbin_log_density(1, 4, 1.0), ConfigError);
}

TEST(KappaRecent, NoIncidenceNoRecents) { EXPECT_DOUBLE_EQ(kappa_recent(0.0, 0.2, kPhiaWindowYears, 0.0), 0.0); }

TEST(KappaRecent, PhiaPreset) {
  EXPECT_NEAR(kappa_recent(0.01, 0.1, kPhiaWindowYears, kPhiaFalseRecent), 1.0 - std::exp(-0.09 * 130.0 / 365.25),
              1e-12);
  EXPECT_NEAR(kappa_recent(0.01, 0.1, kPhiaWindowYears, kPhiaFalseRecent), 0.03153, 5e-6);
}

TEST(KappaRecent, MonotoneInRate) {
  const double a = kappa_recent(0.001, 0.1, kPhiaWindowYears, 0.0);
  const double b = kappa_recent(0.01, 0.1, kPhiaWindowYears, 0.0);
  const double c = kappa_recent(0.05, 0.1, kPhiaWindowYears, 0.0);
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
}

TEST(KappaRecent, RejectsZeroPrevalence) { EXPECT_THROW(kappa_recent(0.01, 0.0, 0.3, 0.0), ConfigError); }

TEST(SkewProductIntegrand, PositiveAndKnownAtOrigin) {
  EXPECT_NEAR(fig2_integrand(0.0, 0.0), 1.0 / (2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(fig2_integrand(0.0, 0.0), 0.159155, 1e-6);
  for (double a = -8; a <= 8; a += 2)
    for (double b = -8; b <= 8; b += 2) EXPECT_GT(fig2_integrand(a, b), 0.0);
}

TEST(SkewProductIntegrand, TrapezoidIntegralIsFour) {
  // The box must reach |theta2| ~ 26 to hold the mass along the skewed ridge.
  const double total = oracle::trapezoid_2d(fig2_integrand, -30.0, 30.0, 1000);
  EXPECT_NEAR(total, 4.0, 1e-4);
}

TEST(SkewNormal, IntegratesToOne) {
  double s = 0.0;
  const double h = 1e-3;
  for (double z = -12.0; z <= 12.0; z += h) s += skewnormal_pdf(z, 2.0) * h;
  EXPECT_NEAR(s, 1.0, 1e-6);
  for (double z : {-40.0, -36.0, -20.0, 0.0, 3.0})
    EXPECT_NEAR(std_normal_log_cdf(z), oracle::std_normal_log_cdf_high_precision(z), 1e-6 * std::max(1.0, z * z)) << z;
}

TEST(SkewProductModel, LogJointMatchesIntegrand) {
  const auto model = make_model("fig2");
  EXPECT_EQ(model->latent_dim(), 0u);
  EXPECT_EQ(model->hyper_dim(), 2u);
  VectorXd t(2);
  t << 0.4, -1.2;
  EXPECT_NEAR(model->log_joint(VectorXd(0), t), std::log(fig2_integrand(0.4, -1.2)), 1e-12);
}

TEST(MiniElgm, DimensionsAndBlocks) {
  const auto model = make_model("mini_elgm");
  EXPECT_EQ(model->latent_dim(), 25u);
  EXPECT_EQ(model->hyper_dim(), 2u);
  const auto& blocks = model->space().latent_blocks;
  ASSERT_EQ(blocks.size(), 3u);
  EXPECT_EQ(blocks[0].name, "beta0");
  EXPECT_EQ(blocks[1].name, "u_iid");
  EXPECT_EQ(blocks[2].name, "u_icar");
  const auto age = make_model("mini_elgm_age");
  EXPECT_EQ(age->hyper_dim(), 4u);
  EXPECT_EQ(age->latent_dim(), 30u);
}

TEST(MiniElgm, OutputsAreAreaPrevalences) {
  const auto model = make_model("mini_elgm");
  const auto names = model->output_names();
  ASSERT_EQ(names.size(), 12u);
  EXPECT_EQ(names.front(), "rho[1]");
  const VectorXd x = VectorXd::Zero(25);
  const VectorXd out = model->output_map(x, VectorXd::Zero(2));
  for (Eigen::Index i = 0; i < out.size(); ++i) EXPECT_NEAR(out(i), 0.5, 1e-12);
}

TEST(MiniElgm, RejectsUnknownConfigKeys) {
  EXPECT_THROW(make_model("mini_elgm", nlohmann::json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(make_model("no_such_model"), ConfigError);
}

TEST(MiniElgm, FixtureHasExpectedShape) {
  const auto rows = read_survey_csv(default_data_dir() / "mini_elgm.csv");
  EXPECT_EQ(rows.size(), 60u);
  for (const auto& r : rows) {
    EXPECT_GE(r.y, 0.0);
    EXPECT_LE(r.y, r.m_eff);
    EXPECT_EQ(r.sex, "female");
  }
  const Adjacency adj = read_adjacency_csv(default_data_dir() / "mini_elgm_adjacency.csv", 12);
  EXPECT_EQ(adj.edges.size(), 17u);
}

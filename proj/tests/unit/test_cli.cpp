#include <filesystem>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "aghq/errors.hpp"
#include "aghq/io.hpp"
#include "aghq/posterior.hpp"
#include "aghq_cli/cli.hpp"

namespace fs = std::filesystem;
using namespace aghq;
using namespace aghq::cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("aghq_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string config_path(const std::string& name) { return std::string(AGHQ_SOURCE_DIR) + "/configs/" + name; }

RunConfig valid_pca() {
  RunConfig c;
  c.model = "mini_elgm";
  c.method = "pca-aghq";
  c.pca_threshold = 0.9;
  c.seed = 1;
  return c;
}

}  // namespace

TEST(RunConfig, ValidationRules) {
  EXPECT_NO_THROW(valid_pca().validate());
  RunConfig c = valid_pca();
  c.decomposition = "cholesky";
  EXPECT_THROW(c.validate(), ConfigError);
  c = valid_pca();
  c.s = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = valid_pca();
  c.pca_threshold.reset();
  EXPECT_THROW(c.validate(), ConfigError);
  c = valid_pca();
  c.seed.reset();
  EXPECT_THROW(c.validate(), ConfigError);
  c = valid_pca();
  c.method = "nuts";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RunConfig, JsonRoundTripAndUnknownKeys) {
  const RunConfig c = valid_pca();
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  EXPECT_FALSE(c.to_json().contains("output_dir"));
  nlohmann::json j = c.to_json();
  j["bogus"] = 1;
  EXPECT_THROW(RunConfig::from_json(j), ConfigError);
}

TEST(Cli, SkewProductPresetNormalizingConstant) {
  const fs::path out = scratch("fig2");
  ASSERT_EQ(run({"fit", "--config", config_path("fig2_aghq.json"), "--out", out.string()}), kExitOk);
  const auto mode = nlohmann::json::parse(slurp(out / "mode.json"));
  EXPECT_NEAR(std::exp(mode["log_normconst"].get<double>()), 4.0, 0.02);
  for (const char* f : {"config.lock.json", "scree.csv", "nodes.csv", "fit_state.json"}) EXPECT_TRUE(fs::exists(out / f));
}

TEST(Cli, EbWritesSingleNode) {
  const fs::path out = scratch("eb");
  ASSERT_EQ(run({"fit", "--config", config_path("mini_elgm_eb.json"), "--out", out.string()}), kExitOk);
  const std::string nodes = slurp(out / "nodes.csv");
  EXPECT_EQ(std::count(nodes.begin(), nodes.end(), '\n'), 2);
}

TEST(Cli, FitAndSampleAreDeterministic) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  for (const fs::path& dir : {a, b}) {
    ASSERT_EQ(run({"fit", "--config", config_path("mini_elgm_pca.json"), "--out", dir.string()}), kExitOk);
    ASSERT_EQ(run({"sample", "--fit", dir.string(), "--n", "200"}), kExitOk);
  }
  for (const char* f : {"mode.json", "nodes.csv", "scree.csv", "samples.csv", "provenance.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, SampleOutputs) {
  const fs::path out = scratch("sample");
  ASSERT_EQ(run({"fit", "--config", config_path("mini_elgm_pca.json"), "--out", out.string()}), kExitOk);
  ASSERT_EQ(run({"sample", "--fit", out.string(), "--n", "123", "--seed", "5"}), kExitOk);
  const SampleSet s = read_samples_csv(out / "samples.csv");
  EXPECT_EQ(s.draws.rows(), 123);
  const auto has_block = [&](const std::string& prefix) {
    return std::any_of(s.names.begin(), s.names.end(), [&](const std::string& n) { return n.rfind(prefix, 0) == 0; });
  };
  for (const char* block : {"beta0", "u_iid[", "u_icar[", "rho["}) EXPECT_TRUE(has_block(block)) << block;
  const auto prov = nlohmann::json::parse(slurp(out / "provenance.json"));
  EXPECT_EQ(prov["seed"].get<std::uint64_t>(), 5u);
  EXPECT_EQ(prov["method"].get<std::string>(), "PCA-AGHQ");
  EXPECT_TRUE(prov.contains("config_digest"));
}

TEST(Cli, OutputsRoundTripByteIdentical) {
  const fs::path out = scratch("roundtrip");
  ASSERT_EQ(run({"fit", "--config", config_path("mini_elgm_pca.json"), "--out", out.string()}), kExitOk);
  ASSERT_EQ(run({"sample", "--fit", out.string(), "--n", "50"}), kExitOk);
  const std::string original = slurp(out / "samples.csv");
  write_samples_csv(out / "again.csv", read_samples_csv(out / "samples.csv"));
  EXPECT_EQ(slurp(out / "again.csv"), original);
  for (const char* f : {"mode.json", "config.lock.json", "provenance.json", "fit_state.json"}) {
    write_json(out / "copy.json", read_json(out / f));
    EXPECT_EQ(slurp(out / "copy.json"), slurp(out / f)) << f;
  }
  for (const char* f : {"nodes.csv", "scree.csv"}) {
    EXPECT_EQ(to_csv_string(read_csv(out / f)), slurp(out / f)) << f;
  }
}

TEST(Cli, CompareSelfIsZero) {
  const fs::path out = scratch("compare");
  ASSERT_EQ(run({"fit", "--config", config_path("mini_elgm_eb.json"), "--out", out.string()}), kExitOk);
  ASSERT_EQ(run({"sample", "--fit", out.string(), "--n", "200"}), kExitOk);
  const std::string samples = (out / "samples.csv").string();
  ASSERT_EQ(run({"compare", "--a", samples, "--b", samples, "--report", (out / "report.json").string()}), kExitOk);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  for (const auto& [k, v] : report["ks"].items()) EXPECT_EQ(v.get<double>(), 0.0) << k;
  EXPECT_EQ(report["mmd"].get<double>(), 0.0);
  EXPECT_EQ(report["rmse_mean"].get<double>(), 0.0);
  EXPECT_EQ(report["rmse_sd"].get<double>(), 0.0);
}

TEST(Cli, DiagnoseSingleNodeIsDegenerate) {
  const fs::path out = scratch("diagnose");
  ASSERT_EQ(run({"fit", "--config", config_path("mini_elgm_eb.json"), "--out", out.string()}), kExitOk);
  ASSERT_EQ(run({"sample", "--fit", out.string(), "--n", "200"}), kExitOk);
  ASSERT_EQ(run({"diagnose", "--fit", out.string(), "--reference", (out / "samples.csv").string(), "--out",
                 (out / "diag").string()}),
            kExitOk);
  const std::string coverage = slurp(out / "diag" / "coverage.csv");
  EXPECT_EQ(coverage.rfind("param,coverage_sd,target,degenerate\n", 0), 0u);
  EXPECT_NE(coverage.find(",0.288675"), std::string::npos);
  EXPECT_NE(coverage.find("true"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "diag" / "scree.csv"));
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("exit");
  EXPECT_EQ(run({"sample", "--fit", (out / "missing").string()}), kExitMissingArtifact);
  EXPECT_EQ(run({"fit", "--model", "fig2", "--method", "aghq", "--out", out.string()}), kExitConfig);
  EXPECT_EQ(run({"fit", "--model", "nonexistent", "--method", "aghq", "--seed", "1", "--out", out.string()}),
            kExitConfig);
  EXPECT_EQ(run({"fit", "--bogus-flag"}), kExitConfig);
  EXPECT_EQ(run({"compare", "--a", (out / "x.csv").string(), "--b", (out / "y.csv").string(), "--report",
                 (out / "r.json").string()}),
            kExitMissingArtifact);
}

TEST(Cli, NodesCommand) {
  const fs::path out = scratch("nodes");
  ASSERT_EQ(run({"nodes", "--levels", "3,2", "--out", (out / "grid.csv").string()}), kExitOk);
  const std::string text = slurp(out / "grid.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}

TEST(Cli, FlagsOverrideConfig) {
  const fs::path out = scratch("override");
  ASSERT_EQ(run({"fit", "--config", config_path("fig2_aghq.json"), "--k", "3", "--out", out.string()}), kExitOk);
  const auto lock = nlohmann::json::parse(slurp(out / "config.lock.json"));
  EXPECT_EQ(lock["k"].get<int>(), 3);
}

TEST(Cli, ComparePcaAgainstReferenceSampler) {
  const fs::path fit = scratch("e2e_fit"), mc = scratch("e2e_mcmc");
  ASSERT_EQ(run({"fit", "--config", config_path("mini_elgm_pca.json"), "--out", fit.string()}), kExitOk);
  ASSERT_EQ(run({"sample", "--fit", fit.string(), "--n", "500"}), kExitOk);
  ASSERT_EQ(run({"mcmc", "--config", config_path("mini_elgm_mcmc.json"), "--n-iter", "2000", "--thin", "1", "--out",
                 mc.string()}),
            kExitOk);
  for (const char* f : {"config.lock.json", "samples.csv", "provenance.json", "convergence.json"})
    EXPECT_TRUE(fs::exists(mc / f)) << f;
  const auto conv = nlohmann::json::parse(slurp(mc / "convergence.json"));
  EXPECT_TRUE(conv.contains("ess_min"));
  EXPECT_TRUE(conv.contains("rhat_max"));
  const fs::path report = fit / "report.json";
  ASSERT_EQ(run({"compare", "--a", (fit / "samples.csv").string(), "--b", (mc / "samples.csv").string(), "--report",
                 report.string()}),
            kExitOk);
  const auto r = nlohmann::json::parse(slurp(report));
  for (const char* key : {"ks", "ks_by_block", "mmd", "mmd_order3", "rmse_mean", "mae_mean", "rmse_sd", "mae_sd",
                          "exceedance"})
    ASSERT_TRUE(r.contains(key)) << key;
  for (const char* key : {"mmd", "mmd_order3", "rmse_mean", "mae_mean", "rmse_sd", "mae_sd"})
    EXPECT_TRUE(std::isfinite(r[key].get<double>())) << key;
  for (const auto& [k, v] : r["ks"].items()) EXPECT_TRUE(std::isfinite(v.get<double>())) << k;
  EXPECT_EQ(r["method_a"].get<std::string>(), "PCA-AGHQ");
}

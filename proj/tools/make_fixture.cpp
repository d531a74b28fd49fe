// Regenerates the mini_elgm fixture files from fixed ground truth.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "aghq/io.hpp"
#include "aghq/model_library.hpp"

namespace {

constexpr std::uint64_t kSeed = 20240101;
constexpr int kRows = 4;
constexpr int kCols = 3;
constexpr int kAgeGroups = 5;
constexpr double kBeta0 = -2.0;
constexpr double kSigmaX = 0.6;
constexpr double kPhiX = 0.5;
constexpr double kSigmaA = 0.4;
constexpr double kPhiA = 0.6;

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path out_dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(out_dir);

  std::mt19937_64 rng(kSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(20.0, 80.0);

  const aghq::Adjacency adj = aghq::Adjacency::grid(kRows, kCols);
  const std::size_t n = adj.n;

  // Structured draw: w = V diag(1/sqrt(lambda)) z over the non-null eigenvectors.
  const aghq::PrecisionStructure icar = aghq::precision_icar(adj, true);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(icar.matrix);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z(static_cast<Eigen::Index>(i)) = normal(rng);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < eig.eigenvalues().size(); ++j) {
    const double lam = eig.eigenvalues()(j);
    if (lam > 1e-9) w += eig.eigenvectors().col(j) * (z(j) / std::sqrt(lam));
  }
  Eigen::VectorXd v(n);
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = normal(rng);
  const Eigen::VectorXd spatial = aghq::bym2_effect(v, w, kSigmaX, kPhiX);

  Eigen::VectorXd age(kAgeGroups);
  age(0) = kSigmaA * normal(rng);
  for (int a = 1; a < kAgeGroups; ++a)
    age(a) = kPhiA * age(a - 1) + kSigmaA * std::sqrt(1.0 - kPhiA * kPhiA) * normal(rng);

  aghq::CsvTable survey;
  survey.header = {"area_id", "age_group", "sex", "y", "m_eff"};
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < kAgeGroups; ++a) {
      const double m_eff = uniform(rng);
      const double p = aghq::logistic(kBeta0 + spatial(static_cast<Eigen::Index>(i)) + age(a));
      const int trials = static_cast<int>(std::lround(m_eff));
      std::binomial_distribution<int> binom(trials, p);
      const double y = static_cast<double>(binom(rng)) * m_eff / static_cast<double>(trials);
      survey.rows.push_back({std::to_string(i + 1), std::to_string(a + 1), "female", aghq::format_double(y),
                             aghq::format_double(m_eff)});
    }
  }

  aghq::CsvTable edges;
  edges.header = {"a", "b"};
  for (const auto& [a, b] : adj.edges) edges.rows.push_back({std::to_string(a + 1), std::to_string(b + 1)});

  aghq::write_csv(out_dir / "mini_elgm.csv", survey);
  aghq::write_csv(out_dir / "mini_elgm_adjacency.csv", edges);
  std::cout << "wrote " << survey.rows.size() << " survey rows and " << edges.rows.size() << " edges to "
            << out_dir.string() << "\n";
  return 0;
}

#include <benchmark/benchmark.h>

#include "aghq/adapt_pca.hpp"
#include "aghq/ghq_rules.hpp"
#include "aghq/laplace.hpp"
#include "aghq/models.hpp"
#include "aghq/posterior.hpp"

using namespace aghq;

static void BM_ProductGrid(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(product_grid(GridSpec::uniform(dim, k)));
}
BENCHMARK(BM_ProductGrid)->Args({2, 7})->Args({4, 3})->Args({8, 3});

static void BM_LogLaplace(benchmark::State& state) {
  const auto model = make_model(state.range(0) == 0 ? "mini_elgm" : "mini_elgm_age");
  const VectorXd theta = VectorXd::Zero(static_cast<Eigen::Index>(model->hyper_dim()));
  const VectorXd warm = log_laplace(*model, theta, VectorXd()).x_hat;
  for (auto _ : state) benchmark::DoNotOptimize(log_laplace(*model, theta, warm));
}
BENCHMARK(BM_LogLaplace)->Arg(0)->Arg(1);

static void BM_Normalize(benchmark::State& state) {
  const auto model = make_model("mini_elgm_age");
  const OuterResult opt = outer_optimize(*model, VectorXd::Zero(4));
  const ModeCurvature curv = outer_curvature(*model, opt.theta_hat, opt.x_hat);
  const AdaptedGrid grid = build_adapted_grid(curv, GridSpec::pca(4, 2, 3), Decomposition::Spectral);
  NormalizeOptions opts;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(normalize(grid, *model, opt.x_hat, opts));
}
BENCHMARK(BM_Normalize)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();

#include <random>

#include <benchmark/benchmark.h>

#include "zslgmm/dimred.hpp"
#include "zslgmm/gmm_em.hpp"
#include "zslgmm/sparse_synth.hpp"
#include "zslgmm/synthetic.hpp"

using namespace zslgmm;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(gen);
  return m;
}

CovarianceMode mode_arg(int64_t v) { return static_cast<CovarianceMode>(v); }

MixtureModel start_model(const Eigen::MatrixXd& X, int k, CovarianceMode mode) {
  std::vector<GaussianSignature> comps;
  const Eigen::Index d = X.cols();
  for (int c = 0; c < k; ++c) {
    const Eigen::VectorXd at = X.row(c * (X.rows() / k)).transpose();
    if (mode == CovarianceMode::Unit) comps.push_back(GaussianSignature::unit(at, c));
    else if (mode == CovarianceMode::Diagonal) comps.push_back(GaussianSignature::diagonal(at, Eigen::VectorXd::Ones(d), c));
    else comps.push_back(GaussianSignature::full(at, Eigen::MatrixXd::Identity(d, d), c));
  }
  return init_mixture(std::move(comps));
}

}  // namespace

// Args: seen atoms, embedding dimension.
static void BM_Lasso(benchmark::State& state) {
  std::mt19937_64 gen(1);
  const Eigen::MatrixXd D = gaussian(gen, state.range(1), state.range(0));
  const Eigen::VectorXd e = gaussian(gen, state.range(1), 1);
  LassoOptions opt;
  opt.lambda = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(solve_lasso(D, e, opt).objective);
}
BENCHMARK(BM_Lasso)->Args({40, 85})->Args({150, 312})->Unit(benchmark::kMicrosecond);

// Args: points, dimension, components, mode (0 full, 1 diagonal, 2 unit).
static void BM_EStep(benchmark::State& state) {
  std::mt19937_64 gen(2);
  const Eigen::MatrixXd X = gaussian(gen, state.range(0), state.range(1));
  const MixtureModel m = start_model(X, static_cast<int>(state.range(2)), mode_arg(state.range(3)));
  for (auto _ : state) benchmark::DoNotOptimize(e_step(m, X).log_likelihood);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EStep)
    ->Args({6000, 80, 10, 0})
    ->Args({6000, 80, 10, 1})
    ->Args({6000, 80, 10, 2})
    ->Unit(benchmark::kMillisecond);

static void BM_Fit(benchmark::State& state) {
  SyntheticSpec spec;
  spec.classes = 10;
  spec.per_class = 200;
  spec.feature_dim = static_cast<int>(state.range(0));
  spec.embedding_dim = spec.feature_dim;
  spec.seed = 3;
  const Eigen::MatrixXd X = generate_synthetic(spec).dataset.features;
  const auto mode = mode_arg(state.range(1));
  const MixtureModel m = start_model(X, 10, mode);
  for (auto _ : state) benchmark::DoNotOptimize(fit(m, X).trace.iterations);
}
BENCHMARK(BM_Fit)->Args({10, 0})->Args({10, 2})->Args({40, 1})->Unit(benchmark::kMillisecond);

// Args: points, input dimension, output dimension.
static void BM_Pca(benchmark::State& state) {
  std::mt19937_64 gen(4);
  const Eigen::MatrixXd X = gaussian(gen, state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca(X, state.range(2)).explained_variance(0));
}
BENCHMARK(BM_Pca)->Args({2000, 512, 80})->Args({300, 4096, 80})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

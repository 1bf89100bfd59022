#include <benchmark/benchmark.h>

#include <vector>

#include "splinedeconv/bspline.hpp"
#include "splinedeconv/deconv_baseline.hpp"
#include "splinedeconv/density_mle.hpp"
#include "splinedeconv/semipar_regression.hpp"
#include "splinedeconv/simulation.hpp"

using namespace splinedeconv;

namespace {

SimDesign design(Task task, int n) {
  SimDesign d;
  d.task = task;
  d.n = n;
  return d;
}

void BM_EvalBasis(benchmark::State& state) {
  const auto kv = KnotVector::uniform(static_cast<int>(state.range(0)), 4);
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_basis(kv, x));
    x += 0.618033988749895;
    if (x >= 1.0) x -= 1.0;
  }
}
BENCHMARK(BM_EvalBasis)->Arg(5)->Arg(20)->Arg(80);

void BM_DensityLoglikGrad(benchmark::State& state) {
  const auto d = design(Task::density, static_cast<int>(state.range(0)));
  const auto data = generate(d, 0);
  const auto kv = KnotVector::uniform(d.interior_knots(), 4);
  const DensityLikelihood lik(kv, error_law_for(d.model), data.w);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(kv.basis_dim());
  for (auto _ : state) benchmark::DoNotOptimize(lik.evaluate(theta, true));
}
BENCHMARK(BM_DensityLoglikGrad)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_DensityFit(benchmark::State& state) {
  const auto d = design(Task::density, static_cast<int>(state.range(0)));
  const auto data = generate(d, 0);
  const auto kv = KnotVector::uniform(d.interior_knots(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(fit_density(kv, error_law_for(d.model), data.w));
}
BENCHMARK(BM_DensityFit)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_BuildAHPerPoint(benchmark::State& state) {
  const auto kv = KnotVector::uniform(5, 4);
  const RegressionModel m(kv, Eigen::VectorXd::LinSpaced(kv.basis_dim(), -1.0, 1.0));
  const auto work = WorkingDensity::uniform(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(build_AH_per_point(m, regression_noise(), error_law_for(ErrorModel::IIa), work));
}
BENCHMARK(BM_BuildAHPerPoint)->Arg(10)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_RegressionFit(benchmark::State& state) {
  const auto d = design(Task::regression, static_cast<int>(state.range(0)));
  const auto data = generate(d, 0);
  const auto kv = KnotVector::uniform(d.interior_knots(), 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_regression(kv, regression_noise(), error_law_for(d.model),
                                            WorkingDensity::uniform(25), data.w, data.y));
}
BENCHMARK(BM_RegressionFit)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_DeconvDensity(benchmark::State& state) {
  const auto d = design(Task::density, static_cast<int>(state.range(0)));
  const auto data = generate(d, 0);
  const auto law = error_law_for(d.model);
  KernelSpec spec;
  spec.bandwidth = data_bandwidth(data.w, &law);
  spec.error = law;
  const auto grid = unit_eval_grid();
  for (auto _ : state) benchmark::DoNotOptimize(deconv_density(data.w, spec, grid));
}
BENCHMARK(BM_DeconvDensity)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <conmix/estimate.hpp>
#include <conmix/likelihood.hpp>
#include <conmix/moments.hpp>
#include <conmix/simulate.hpp>
#include <conmix/special_fns.hpp>

#include <benchmark/benchmark.h>

#include <vector>

using namespace conmix;

namespace {

void BM_GhNodes(benchmark::State& state) {
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gh_nodes(order));
}
BENCHMARK(BM_GhNodes)->Arg(5)->Arg(21)->Arg(41);

void BM_MvnCdf(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Eigen::MatrixXd R = Eigen::MatrixXd::Constant(n, n, 0.5);
  R.diagonal().setOnes();
  const CorrelationMatrix corr(R);
  std::vector<double> upper(n, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(mvn_cdf(upper, corr));
}
BENCHMARK(BM_MvnCdf)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

struct Setup {
  ModelSpec spec;
  Params params;
  std::vector<Subject> subjects;
};

Setup poisson_setup(int q, Overdispersion od) {
  Setup s;
  s.spec.family = FamilyKind::Poisson;
  s.spec.fixed_effects = {"intercept", "time"};
  s.spec.random_effects = {"intercept"};
  if (q == 2) s.spec.random_effects.push_back("time");
  s.spec.overdispersion = od;
  s.params = default_params(s.spec);
  s.params.xi << 0.5, -0.05;
  s.params.D.diagonal().setConstant(q == 1 ? 1.0 : 0.3);
  if (s.spec.gamma_effects()) {
    s.params.alpha = {2.5};
    s.params.beta = {0.4};
  }
  SimDesign d;
  d.subjects = 200;
  d.occasions = 10;
  d.covariates = {CovariateGenerator::time("time")};
  s.subjects = build_designs(s.spec, simulate(s.spec, s.params, d));
  return s;
}

void BM_SubjectLoglik(benchmark::State& state) {
  const Setup s = poisson_setup(static_cast<int>(state.range(0)),
                                state.range(1) ? Overdispersion::Independent : Overdispersion::None);
  for (auto _ : state) benchmark::DoNotOptimize(subject_loglik(s.spec, s.params, s.subjects.front()));
}
BENCHMARK(BM_SubjectLoglik)->Args({1, 0})->Args({1, 1})->Args({2, 1})->Unit(benchmark::kMicrosecond);

void BM_TotalLoglik(benchmark::State& state) {
  const Setup s = poisson_setup(1, Overdispersion::Independent);
  for (auto _ : state) benchmark::DoNotOptimize(total_loglik(s.spec, s.params, s.subjects));
}
BENCHMARK(BM_TotalLoglik)->Unit(benchmark::kMillisecond);

void BM_FitCombinedPoisson(benchmark::State& state) {
  const Setup s = poisson_setup(1, Overdispersion::Independent);
  FitOptions opts;
  opts.starts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit(s.spec, s.subjects, {}, opts));
}
BENCHMARK(BM_FitCombinedPoisson)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_CorrelationGrid(benchmark::State& state) {
  ModelSpec spec;
  spec.family = FamilyKind::Poisson;
  spec.fixed_effects = {"intercept", "time"};
  spec.random_effects = {"intercept"};
  Params p = default_params(spec);
  p.xi << 0.8179, -0.0143;
  p.D(0, 0) = 1.1568;
  std::vector<double> grid;
  for (int t = 1; t <= 27; ++t) grid.push_back(t);
  for (auto _ : state) benchmark::DoNotOptimize(marginal_correlation(spec, p, Profile{}, grid));
}
BENCHMARK(BM_CorrelationGrid)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();

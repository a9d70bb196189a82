#include "mim/harness.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace mim;

ad::Matrix uniform_points(int d, ad::Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  ad::Matrix x(d, n);
  for (ad::Index j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) x(i, j) = u(rng);
  }
  return x;
}

// Network value plus input Laplacian and the parameter gradient of its sum.
void BM_NetworkLaplacian(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const ad::Index points = state.range(1);
  const nn::Bundle bundle({nn::make_spec(d, 10, 2, 1, nn::Activation::ReQu)});
  const auto params = bundle.init(1);
  const ad::Matrix x = uniform_points(d, points, 2);
  ad::Tape tape(params, bundle.blocks());
  for (auto _ : state) {
    tape.clear();
    const ad::Jet in = ad::lift_inputs(tape, x, ad::Order::Second);
    const ad::Jet u = bundle.forward(0, tape, in);
    const ad::Var loss = ad::sum_squares(u.laplacian(d));
    benchmark::DoNotOptimize(tape.gradient(loss));
  }
  state.SetItemsProcessed(state.iterations() * points);
}
BENCHMARK(BM_NetworkLaplacian)->Args({2, 256})->Args({4, 256})->Args({8, 256})->Unit(benchmark::kMicrosecond);

// One full loss-and-gradient pass of a desk experiment on 1000 points.
void BM_LossAndGradient(benchmark::State& state, const std::string& experiment, loss::Method method,
                        int d, int n, int m) {
  harness::ExperimentConfig c;
  c.experiment = experiment;
  c.method = method;
  c.d = d;
  c.n = n;
  c.m = m;
  c.interior = 1000;
  c.eval_points = 16;
  c = harness::with_defaults(c);
  const harness::Problem p = harness::build_problem(c);
  const auto params = p.trial->init(1);
  Rng rng(3);
  const loss::Batch batch = p.objective->sample(rng);
  opt::EvalOptions opts;
  opts.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(opt::loss_and_gradient(*p.objective, params, batch, opts));
  state.SetItemsProcessed(state.iterations() * c.interior);
}
BENCHMARK_CAPTURE(BM_LossAndGradient, dirichlet_mim, "dirichlet-elliptic-ball", loss::Method::MIM, 2, 10, 2)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_LossAndGradient, dirichlet_dgm, "dirichlet-elliptic-ball", loss::Method::DGM, 2, 10, 2)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_LossAndGradient, monge_ampere, "monge-ampere", loss::Method::MIM, 2, 10, 2)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_LossAndGradient, neumann_ball_dgm, "neumann-ball", loss::Method::DGM, 2, 10, 3)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_LossAndGradient, wave_mim2, "wave", loss::Method::MIM2, 2, 20, 3)
    ->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  opt::AdamState s(n, {});
  std::vector<double> params(n, 0.1), grad(n, 0.01);
  for (auto _ : state) {
    opt::adam_step(s, params, grad);
    benchmark::DoNotOptimize(params.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_AdamStep)->Arg(1000)->Arg(100000);

void BM_VerifySuite(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(harness::verify());
}
BENCHMARK(BM_VerifySuite)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();

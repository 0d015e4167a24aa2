#include <benchmark/benchmark.h>

#include <random>

#include "credfed/federation.hpp"
#include "credfed/losses.hpp"
#include "credfed/model.hpp"

using namespace credfed;

namespace {

Tensor random_batch(std::size_t n, std::size_t d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor x({n, d});
  for (double& v : x.values()) v = g(rng);
  return x;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const ModelConfig mc;
  const ModelParams p = ModelParams::initialize(mc, 1);
  const Tensor x = random_batch(static_cast<std::size_t>(state.range(0)), mc.num_features);
  for (auto _ : state) benchmark::DoNotOptimize(predict_log_probs(p, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(64)->Arg(512);

static void BM_ForwardBackward(benchmark::State& state) {
  const ModelConfig mc;
  const ModelParams p = ModelParams::initialize(mc, 1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_batch(n, mc.num_features);
  std::vector<int> y(n, 0);
  for (std::size_t i = 0; i < n; i += 7) y[i] = 1;
  for (auto _ : state) {
    auto obj = local_objective(x, y, p, p.flat(), LossConfig{}, 0.01);
    benchmark::DoNotOptimize(obj.gradient);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(64);

static void BM_LocalEpoch(benchmark::State& state) {
  SyntheticSpec spec;
  spec.client_sizes = {1148};
  spec.minority_rates = {0.1175};
  const auto data = generate_synthetic(spec);
  const auto clients = make_clients(data.clients, 0.8, 0);
  const ModelParams p = ModelParams::initialize(ModelConfig{}, 1);
  for (auto _ : state) {
    Rng rng(3);
    benchmark::DoNotOptimize(train_local(clients[0], p, LossConfig{}, {0.01, 1, 64, 0.01}, rng));
  }
}
BENCHMARK(BM_LocalEpoch)->Unit(benchmark::kMillisecond);

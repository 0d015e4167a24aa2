#include <benchmark/benchmark.h>

#include <random>

#include "credfed/federation.hpp"
#include "credfed/ring.hpp"
#include "credfed/secure_agg.hpp"

using namespace credfed;

namespace {

std::vector<double> random_values(std::size_t n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

static void BM_NttMultiply(benchmark::State& state) {
  const he::SchemeParams sp;
  const he::NegacyclicNtt ntt(sp.ring_degree, sp.modulus);
  std::mt19937_64 rng(1);
  he::Poly a(sp.ring_degree), b(sp.ring_degree);
  for (auto& x : a) x = rng() % sp.modulus;
  for (auto& x : b) x = rng() % sp.modulus;
  for (auto _ : state) benchmark::DoNotOptimize(ntt.multiply(a, b));
}
BENCHMARK(BM_NttMultiply);

static void BM_Encrypt(benchmark::State& state) {
  const he::Scheme scheme{he::SchemeParams{}};
  Rng rng(1);
  const auto keys = scheme.keygen(rng);
  const auto v = random_values(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scheme.encrypt(keys.pk, v, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Encrypt)->Arg(1024)->Arg(10000);

static void BM_Decrypt(benchmark::State& state) {
  const he::Scheme scheme{he::SchemeParams{}};
  Rng rng(1);
  const auto keys = scheme.keygen(rng);
  const auto ct = scheme.encrypt(keys.pk, random_values(10000), rng);
  for (auto _ : state) benchmark::DoNotOptimize(scheme.decrypt(keys.sk, ct));
}
BENCHMARK(BM_Decrypt);

static void BM_AggregateEncrypted(benchmark::State& state) {
  const he::Scheme scheme{he::SchemeParams{}};
  Rng rng(1);
  const auto keys = scheme.keygen(rng);
  const auto k = static_cast<std::size_t>(state.range(0));
  std::vector<ParameterVector> w(k, ParameterVector(random_values(10000)));
  const std::vector<double> gamma(k, 1.0 / static_cast<double>(k));
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_encrypted(scheme, keys, w, gamma, rng));
}
BENCHMARK(BM_AggregateEncrypted)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_AggregatePlaintext(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  std::vector<ParameterVector> w(k, ParameterVector(random_values(10000)));
  const std::vector<double> gamma(k, 1.0 / static_cast<double>(k));
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_plaintext(w, gamma));
}
BENCHMARK(BM_AggregatePlaintext)->Arg(2)->Arg(4);

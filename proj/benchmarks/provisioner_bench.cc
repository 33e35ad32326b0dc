#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "hetbatch/profile.h"
#include "hetbatch/provisioner.h"
#include "hetbatch/simulator.h"

namespace hetbatch {
namespace {

// Synthetic VGG-19-like coefficients matching the shipped profile.
ProfileSpec BenchProfile() {
  ProfileSpec s;
  for (int b = 1; b <= 4; ++b) {
    const double g = std::pow(b, 0.95);
    s.cpu_avg.push_back({3.0 * g, 0.6, 0.14 * g});
    s.cpu_max.push_back({4.5 * g, 0.6, 0.17 * g});
  }
  s.gpu = {0.012, 0.03};
  s.mem = {1.0, 0.1};
  return s;
}

std::vector<AppSpec> Apps(int n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> slo(0.2, 1.0), rate(0.5, 30.0);
  std::vector<AppSpec> apps;
  for (int i = 0; i < n; ++i) apps.push_back({"a" + std::to_string(i), slo(rng), rate(rng)});
  return apps;
}

void BM_HarmonyBatch(benchmark::State& state) {
  const ModelProfile profile(BenchProfile());
  const auto apps = Apps(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    // A fresh solver per run so knee rates are recomputed.
    Provisioner prov(profile, PricingConfig{});
    benchmark::DoNotOptimize(prov.HarmonyBatch(apps));
  }
}
BENCHMARK(BM_HarmonyBatch)->Arg(1)->Arg(6)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_BaselineBatch(benchmark::State& state) {
  const ModelProfile profile(BenchProfile());
  const auto apps = Apps(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    Provisioner prov(profile, PricingConfig{});
    benchmark::DoNotOptimize(prov.BaselineBatch(apps));
  }
}
BENCHMARK(BM_BaselineBatch)->Arg(1)->Arg(6)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_BaselineMbsPlus(benchmark::State& state) {
  const ModelProfile profile(BenchProfile());
  const auto apps = Apps(static_cast<int>(state.range(0)));
  const Provisioner prov(profile, PricingConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(prov.BaselineMbsPlus(apps));
}
BENCHMARK(BM_BaselineMbsPlus)->Arg(1)->Arg(6)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_FuncProvision(benchmark::State& state) {
  const Provisioner prov(ModelProfile(BenchProfile()), PricingConfig{});
  const Group group = Group::Of({{"a", 0.8, 10.0}, {"b", 1.0, 20.0}});
  for (auto _ : state) benchmark::DoNotOptimize(prov.FuncProvision(group));
}
BENCHMARK(BM_FuncProvision)->Unit(benchmark::kMicrosecond);

void BM_KneeRate(benchmark::State& state) {
  const ModelProfile profile(BenchProfile());
  for (auto _ : state) {
    Provisioner prov(profile, PricingConfig{});
    benchmark::DoNotOptimize(prov.KneeRate(1.0));
  }
}
BENCHMARK(BM_KneeRate)->Unit(benchmark::kMicrosecond);

void BM_RunPlanSim(benchmark::State& state) {
  const ModelProfile profile(BenchProfile());
  const PricingConfig pricing;
  const ProvisionResult plan =
      HarmonyBatch(profile, pricing, {{"A1", 0.5, 5}, {"A2", 0.8, 10}, {"A3", 1.0, 20}});
  SimConfig config;
  config.duration = 1000.0;
  config.latency_mode = LatencyMode::kSliceExact;
  long requests = 0;
  for (auto _ : state) {
    const SimReport r = RunPlanSim(plan, profile, pricing, config);
    requests += r.total_requests;
  }
  state.SetItemsProcessed(requests);
}
BENCHMARK(BM_RunPlanSim)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace hetbatch

BENCHMARK_MAIN();

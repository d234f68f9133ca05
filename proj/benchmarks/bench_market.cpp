#include <benchmark/benchmark.h>

#include "dadp/admm_bidding.hpp"
#include "dadp/atc_coordinator.hpp"
#include "dadp/baselines_oracle.hpp"
#include "dadp/sim/bus_participants.hpp"
#include "dadp/sim/instances.hpp"

namespace {

dadp::DadpParams quiet() {
  dadp::DadpParams p;
  p.record_trace = false;
  return p;
}

dadp::Scenario sized(std::int64_t players, std::uint64_t seed) {
  dadp::sim::InstanceRanges r;
  r.min_las = r.max_las = static_cast<int>(players);
  r.min_esps = r.max_esps = static_cast<int>(players);
  return dadp::sim::random_scenario(seed, r);
}

void BM_RunDadp(benchmark::State& state) {
  const auto sc = sized(state.range(0), 3);
  const auto params = quiet();
  for (auto _ : state) benchmark::DoNotOptimize(dadp::run_dadp(sc, params));
}
BENCHMARK(BM_RunDadp)->Arg(3)->Arg(5)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_RunDadpHeat(benchmark::State& state) {
  const auto sc = dadp::sim::random_scenario(4, {}, dadp::MarketKind::heat);
  const auto params = quiet();
  for (auto _ : state) benchmark::DoNotOptimize(dadp::run_dadp(sc, params));
}
BENCHMARK(BM_RunDadpHeat)->Unit(benchmark::kMillisecond);

void BM_RunDadpOnBus(benchmark::State& state) {
  const auto sc = sized(5, 3);
  const auto params = quiet();
  for (auto _ : state) benchmark::DoNotOptimize(dadp::sim::run_dadp_on_bus(sc, params));
}
BENCHMARK(BM_RunDadpOnBus)->Unit(benchmark::kMillisecond);

void BM_Oracle(benchmark::State& state) {
  const auto sc = sized(state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(dadp::centralized_optimum(sc));
}
BENCHMARK(BM_Oracle)->Arg(5)->Arg(50)->Arg(500);

void BM_Vcg(benchmark::State& state) {
  const auto sc = sized(state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(dadp::vcg_clearing(sc));
}
BENCHMARK(BM_Vcg)->Arg(5)->Arg(50);

void BM_SupplyAllocation(benchmark::State& state) {
  std::vector<double> offers(static_cast<std::size_t>(state.range(0)));
  for (std::size_t j = 0; j < offers.size(); ++j) offers[j] = 1.0 + 0.01 * static_cast<double>(j);
  for (auto _ : state) benchmark::DoNotOptimize(dadp::supply_allocation(offers, 100.0));
}
BENCHMARK(BM_SupplyAllocation)->Arg(10)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();

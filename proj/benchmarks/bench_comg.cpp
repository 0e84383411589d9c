#include <benchmark/benchmark.h>

#include "cgt/comg.hpp"

namespace {

cgt::HashrateDistribution reference_lambda() {
  using cgt::Rational;
  return cgt::validate_hashrate(
      {Rational(1, 2), Rational(1, 5), Rational(3, 10)});
}

void BM_CensorSchedule(benchmark::State& state) {
  auto lam = reference_lambda();
  for (auto _ : state) {
    auto s = cgt::censor_schedule(lam, 1, 10);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_CensorSchedule);

void BM_Oracle(benchmark::State& state) {
  cgt::RaceSpec spec{reference_lambda(), 1, 10, state.range(0)};
  for (auto _ : state) {
    auto r = cgt::best_response_oracle(spec);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Oracle)->Arg(4)->Arg(16)->Arg(32);

void BM_SimulateRace(benchmark::State& state) {
  cgt::RaceSpec spec{reference_lambda(), 1, 10, 4};
  std::vector<cgt::Round> switches{3, 2};
  for (auto _ : state) {
    auto r = cgt::simulate_race(spec, switches, state.range(0), 1234);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_SimulateRace)->Arg(1000)->Arg(10000);

void BM_ResolveRace(benchmark::State& state) {
  auto lam = reference_lambda();
  cgt::TripleSet ts{{"x1", 0, 1}, {"x2", 0, 10}};
  cgt::ConflictSpec c{{{"x1", "x2"}}, {{"x2", 2}}};
  for (auto _ : state) {
    auto d = cgt::resolve_triples(ts, c, lam);
    benchmark::DoNotOptimize(d);
  }
}
BENCHMARK(BM_ResolveRace);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "bmfl/baselines.hpp"
#include "bmfl/deepq.hpp"
#include "bmfl/mdp_env.hpp"
#include "bmfl/network.hpp"

namespace {

using namespace bmfl;

Scenario scenario(int msbs, int sectors, int beams, int users) {
  Scenario sc;
  sc.users = users;
  sc.seed = 3;
  place_msbs(sc, msbs, Placement::Uniform, sectors, beams, 50.0);
  return sc;
}

NetworkState state_of(const Scenario& sc) {
  Rng ur = make_rng(sc.seed, streams::kUsers);
  Rng sr = make_rng(sc.seed, streams::kShadowing);
  return initial_state(sc, ur, sr);
}

void BM_Forward(benchmark::State& st) {
  Rng r(1);
  const auto w = init_weights(MlpSpec::q_network(static_cast<std::size_t>(st.range(0))), r);
  std::vector<double> x(static_cast<std::size_t>(st.range(0)), 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(forward(w, x));
}
BENCHMARK(BM_Forward)->Arg(19)->Arg(43);

void BM_Backward(benchmark::State& st) {
  Rng r(1);
  const auto w = init_weights(MlpSpec::q_network(static_cast<std::size_t>(st.range(0))), r);
  std::vector<double> x(static_cast<std::size_t>(st.range(0)), 0.3);
  std::vector<double> g(w.params.size());
  for (auto _ : st) {
    backward_accumulate(w, x, 1.0, g);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_Backward)->Arg(19)->Arg(43);

BeamPolicy random_policy(const Scenario& sc, Rng& r) {
  const auto acts = enumerate_actions(sc.msbs[0]);
  BeamPolicy p(sc.msbsCount());
  for (auto& s : p.perMsbs) s = acts[r() % acts.size()];
  return p;
}

void BM_EvaluatePolicy(benchmark::State& st) {
  const auto sc = scenario(6, 5, 2, static_cast<int>(st.range(0)));
  const auto s = state_of(sc);
  Rng r(2);
  const auto p = random_policy(sc, r);
  for (auto _ : st) benchmark::DoNotOptimize(evaluate_policy(s, p, sc).throughputBps);
}
BENCHMARK(BM_EvaluatePolicy)->Arg(12)->Arg(30);

void BM_SlotEvaluator(benchmark::State& st) {
  const auto sc = scenario(6, 5, 2, static_cast<int>(st.range(0)));
  const auto s = state_of(sc);
  const SlotEvaluator ev(s, sc);
  Rng r(2);
  const auto p = random_policy(sc, r);
  for (auto _ : st) benchmark::DoNotOptimize(ev.throughput(p));
}
BENCHMARK(BM_SlotEvaluator)->Arg(12)->Arg(30);

void BM_BfsPolicy(benchmark::State& st) {
  const auto sc = scenario(static_cast<int>(st.range(0)), 5, 2, 12);
  const auto s = state_of(sc);
  for (auto _ : st) benchmark::DoNotOptimize(bfs_policy(s, sc));
}
BENCHMARK(BM_BfsPolicy)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_EdbPolicy(benchmark::State& st) {
  const auto sc = scenario(6, 8, 3, 12);
  const auto s = state_of(sc);
  for (auto _ : st) benchmark::DoNotOptimize(edb_policy(s, sc));
}
BENCHMARK(BM_EdbPolicy);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "hybridad/jet.hpp"
#include "hybridad/solvers.hpp"

using namespace hybridad;

namespace {

void BM_JetMul(benchmark::State& s) {
  const int order = static_cast<int>(s.range(0));
  const Jet a = Jet::variable(1.3, order), b = exp(a);
  for (auto _ : s) benchmark::DoNotOptimize(a * b);
}

void BM_JetExp(benchmark::State& s) {
  const Jet a = Jet::variable(0.4, static_cast<int>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(exp(a));
}

void BM_NewtonJetSqrt(benchmark::State& s) {
  const auto sys = make_implicit_system(1, 1, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& a) {
    return std::vector<Var>{x[0] * x[0] - a[0]};
  });
  const std::vector<Jet> a{Jet::variable(2, static_cast<int>(s.range(0)))};
  for (auto _ : s) benchmark::DoNotOptimize(newton_jet(sys, a, 1.0));
}

}  // namespace

BENCHMARK(BM_JetMul)->DenseRange(4, 20, 8);
BENCHMARK(BM_JetExp)->DenseRange(4, 20, 8);
BENCHMARK(BM_NewtonJetSqrt)->DenseRange(4, 20, 8);

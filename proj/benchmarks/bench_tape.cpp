#include <random>

#include <benchmark/benchmark.h>

#include "hybridad/tape.hpp"
#include "support/random_tape.hpp"

using namespace hybridad;

namespace {

testsupport::RandomTape tape_of(int ops, int inputs) {
  std::mt19937_64 rng(42);
  testsupport::RandomTapeOptions o;
  o.inputs = inputs;
  o.ops = ops;
  o.outputs = 1;
  o.branch = false;
  return testsupport::make_random_tape(rng, o);
}

void BM_Eval(benchmark::State& s) {
  const auto rt = tape_of(static_cast<int>(s.range(0)), 5);
  for (auto _ : s) benchmark::DoNotOptimize(tape_eval(rt.tape, rt.x));
}

void BM_ForwardGradient(benchmark::State& s) {
  const auto rt = tape_of(static_cast<int>(s.range(0)), 5);
  for (auto _ : s) benchmark::DoNotOptimize(forward_gradient(rt.tape, rt.x));
}

void BM_ReverseGradient(benchmark::State& s) {
  const auto rt = tape_of(static_cast<int>(s.range(0)), 5);
  for (auto _ : s) benchmark::DoNotOptimize(reverse_gradient(rt.tape, rt.x, 0));
}

void BM_Hessian(benchmark::State& s) {
  const auto rt = tape_of(static_cast<int>(s.range(0)), 5);
  for (auto _ : s) benchmark::DoNotOptimize(hessian(rt.tape, rt.x, 0));
}

}  // namespace

BENCHMARK(BM_Eval)->Range(16, 1024);
BENCHMARK(BM_ForwardGradient)->Range(16, 1024);
BENCHMARK(BM_ReverseGradient)->Range(16, 1024);
BENCHMARK(BM_Hessian)->Range(16, 256);

#include <string>

#include <benchmark/benchmark.h>

#include "hybridad/agdm.hpp"
#include "hybridad/diagram.hpp"
#include "hybridad/sim.hpp"

using namespace hybridad;

namespace {

Diagram first_order() { return load_diagram(std::string(HYBRIDAD_MODELS_DIR) + "/first_order.json"); }

SimConfig config() {
  SimConfig c;
  c.step = 1e-3;
  c.tf = 5;
  return c;
}

void BM_Integrate(benchmark::State& s) {
  const OdeModel m = flatten(first_order());
  for (auto _ : s) benchmark::DoNotOptimize(integrate(m, config()));
}

void BM_IntegrateAgdm(benchmark::State& s) {
  const OdeModel m = flatten(agdm_diff(first_order(), "tau"));
  for (auto _ : s) benchmark::DoNotOptimize(integrate(m, config()));
}

void BM_IntegrateSensitivity(benchmark::State& s) {
  const OdeModel m = sensitivity_extend(flatten(first_order()), "tau");
  for (auto _ : s) benchmark::DoNotOptimize(integrate(m, config()));
}

}  // namespace

BENCHMARK(BM_Integrate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntegrateAgdm)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntegrateSensitivity)->Unit(benchmark::kMillisecond);

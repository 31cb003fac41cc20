// Serial reference kernels against the OpenMP ones. CB2_THREADS caps threads.
#include <benchmark/benchmark.h>

#include <vector>

#include "cb2/kernels.hpp"
#include "cb2/util/rng.hpp"

namespace {

using Gemm = void (*)(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);

struct Operands {
  std::vector<double> a, b, c;
};

Operands operands(std::size_t n) {
  cb2::Rng rng(n);
  Operands o{std::vector<double>(n * n), std::vector<double>(n * n), std::vector<double>(n * n)};
  for (auto& v : o.a) v = rng.uniform(-1.0, 1.0);
  for (auto& v : o.b) v = rng.uniform(-1.0, 1.0);
  return o;
}

void run(benchmark::State& state, Gemm f) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto o = operands(n);
  for (auto _ : state) {
    f(n, n, n, o.a.data(), o.b.data(), o.c.data());
    benchmark::DoNotOptimize(o.c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
  state.counters["threads"] = cb2::kernels::max_threads();
}

void BM_gemm_serial(benchmark::State& s) { run(s, cb2::kernels::serial::gemm); }
void BM_gemm_parallel(benchmark::State& s) { run(s, cb2::kernels::parallel::gemm); }
void BM_gemm_tn_serial(benchmark::State& s) { run(s, cb2::kernels::serial::gemm_tn); }
void BM_gemm_tn_parallel(benchmark::State& s) { run(s, cb2::kernels::parallel::gemm_tn); }
void BM_gemm_nt_serial(benchmark::State& s) { run(s, cb2::kernels::serial::gemm_nt); }
void BM_gemm_nt_parallel(benchmark::State& s) { run(s, cb2::kernels::parallel::gemm_nt); }

}  // namespace

BENCHMARK(BM_gemm_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_parallel)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_tn_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_tn_parallel)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_nt_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_nt_parallel)->RangeMultiplier(2)->Range(32, 256);

int main(int argc, char** argv) {
  cb2::kernels::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}

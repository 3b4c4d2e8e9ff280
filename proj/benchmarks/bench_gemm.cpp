#include "unibench/gemm.hpp"
#include "unibench/gemm_provider.hpp"
#include "unibench/worker_pool.hpp"

#include <benchmark/benchmark.h>

using namespace unibench;

namespace {

void set_flops(benchmark::State& state, std::size_t n) {
    state.counters["GFLOPS"] = benchmark::Counter(static_cast<double>(gemm_flops(n)) * 1e-9,
                                                  benchmark::Counter::kIsIterationInvariantRate);
}

void BM_GemmNaive(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = generate_matrix(n, 42);
    const auto b = generate_matrix(n, 43);
    MatrixF32 c(n);
    for (auto _ : state) {
        gemm_naive_into(a, b, c);
        benchmark::ClobberMemory();
    }
    set_flops(state, n);
}

void BM_GemmTiled(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto tile = static_cast<std::size_t>(state.range(1));
    const auto threads = static_cast<std::size_t>(state.range(2));
    const auto a = generate_matrix(n, 42);
    const auto b = generate_matrix(n, 43);
    MatrixF32 c(n);
    WorkerPool pool(threads);
    for (auto _ : state) {
        gemm_tiled_into(a, b, c, tile, pool, threads);
        benchmark::ClobberMemory();
    }
    set_flops(state, n);
}

void BM_GemmExternal(benchmark::State& state) {
    const auto provider = make_provider(default_provider_name());
    if (!provider->available()) {
        state.SkipWithError("no external GEMM provider");
        return;
    }
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = generate_matrix(n, 42);
    const auto b = generate_matrix(n, 43);
    MatrixF32 c(n);
    for (auto _ : state) {
        provider->multiply(a, b, c);
        benchmark::ClobberMemory();
    }
    set_flops(state, n);
}

void BM_GenerateMatrix(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto m = generate_matrix(n, 42);
        benchmark::DoNotOptimize(m.data().data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}

} // namespace

BENCHMARK(BM_GemmNaive)->RangeMultiplier(2)->Range(32, 512)->ArgName("n")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmTiled)
    ->ArgsProduct({{128, 256, 512}, {32, 64}, {1, 2}})
    ->ArgNames({"n", "tile", "threads"})
    ->UseRealTime()
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmExternal)->RangeMultiplier(2)->Range(32, 1024)->ArgName("n")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateMatrix)->Arg(256)->Arg(1024)->ArgName("n");

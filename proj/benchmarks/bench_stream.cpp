#include "unibench/stream.hpp"

#include <benchmark/benchmark.h>

using namespace unibench;

namespace {

void BM_StreamKernel(benchmark::State& state, StreamKernel kernel) {
    StreamConfig cfg;
    cfg.n_elements = static_cast<std::size_t>(state.range(0));
    const auto threads = static_cast<std::size_t>(state.range(1));
    auto arrays = stream_init(cfg);
    StreamRunner runner(threads);
    for (auto _ : state) {
        state.PauseTiming();
        arrays.reset();
        state.ResumeTiming();
        const double s = runner.run_kernel(kernel, arrays, cfg.scalar_q, threads);
        benchmark::DoNotOptimize(s);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(bytes_moved(kernel, cfg.n_elements, cfg.elem_bytes)));
}

void stream_args(benchmark::internal::Benchmark* b) {
    for (std::int64_t n : {1 << 16, 1 << 20, 1 << 23}) {
        for (std::int64_t t : {1, 2}) {
            b->Args({n, t});
        }
    }
    b->ArgNames({"n", "threads"})->UseRealTime();
}

} // namespace

BENCHMARK_CAPTURE(BM_StreamKernel, copy, StreamKernel::Copy)->Apply(stream_args);
BENCHMARK_CAPTURE(BM_StreamKernel, scale, StreamKernel::Scale)->Apply(stream_args);
BENCHMARK_CAPTURE(BM_StreamKernel, add, StreamKernel::Add)->Apply(stream_args);
BENCHMARK_CAPTURE(BM_StreamKernel, triad, StreamKernel::Triad)->Apply(stream_args);

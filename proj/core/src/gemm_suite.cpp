#include "unibench/gemm_suite.hpp"

#include "unibench/errors.hpp"
#include "unibench/timing.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <numeric>

namespace unibench {

namespace {

std::vector<std::string_view> split_commas(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        std::string_view item = text.substr(pos, comma - pos);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        out.push_back(item);
        pos = comma + 1;
    }
    return out;
}

std::string valid_impls() {
    std::string s;
    for (const auto& n : gemm_implementation_names()) {
        s += (s.empty() ? "" : ", ") + n;
    }
    return s;
}

// Timed repetitions of `multiply`, bracketed by the hooks.
template <typename Multiply>
std::vector<double> time_repetitions(const GemmConfig& config, std::string_view impl, std::size_t n,
                                     const GemmHooks& hooks, Multiply&& multiply) {
    std::vector<double> times;
    times.reserve(config.repetitions);
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
        const GemmRepetition key{impl, n, rep};
        if (hooks.before_repetition) {
            hooks.before_repetition(key);
        }
        const double t = multiply();
        if (hooks.after_repetition) {
            hooks.after_repetition(key, t);
        }
        times.push_back(t);
    }
    return times;
}

class OracleCache {
public:
    const MatrixF32& get(const MatrixF32& a, const MatrixF32& b) {
        if (!oracle_ || oracle_->n() != a.n()) {
            oracle_.emplace(gemm_naive(a, b));
        }
        return *oracle_;
    }

private:
    std::optional<MatrixF32> oracle_;
};

} // namespace

const std::vector<std::string>& gemm_implementation_names() {
    static const std::vector<std::string> names = {std::string(kImplNaive), std::string(kImplTiled),
                                                   std::string(kImplExternal), std::string(kImplGpuNaive),
                                                   std::string(kImplGpuTiled)};
    return names;
}

bool is_gpu_implementation(std::string_view impl) {
    return impl == kImplGpuNaive || impl == kImplGpuTiled;
}

std::vector<std::string> parse_implementation_list(std::string_view text) {
    std::vector<std::string> out;
    for (auto item : split_commas(text)) {
        const auto& names = gemm_implementation_names();
        if (std::find(names.begin(), names.end(), item) == names.end()) {
            throw ConfigError("unknown implementation '" + std::string(item) + "' (valid: " + valid_impls() + ")");
        }
        if (std::find(out.begin(), out.end(), item) == out.end()) {
            out.emplace_back(item);
        }
    }
    return out;
}

std::vector<std::size_t> parse_size_list(std::string_view text) {
    std::vector<std::size_t> out;
    for (auto item : split_commas(text)) {
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
            throw ConfigError("invalid matrix size '" + std::string(item) + "'");
        }
        if (!std::has_single_bit(value)) {
            throw ConfigError("matrix size " + std::to_string(value) + " is not a power of two");
        }
        out.push_back(value);
    }
    return out;
}

void validate_config(const GemmConfig& config) {
    if (config.sizes.empty()) {
        throw ConfigError("gemm: no matrix sizes selected");
    }
    for (auto n : config.sizes) {
        if (!std::has_single_bit(n)) {
            throw ConfigError("gemm: matrix size " + std::to_string(n) + " is not a power of two");
        }
    }
    if (config.repetitions < 1) {
        throw ConfigError("gemm: repetitions must be >= 1");
    }
    if (config.implementations.empty()) {
        throw ConfigError("gemm: no implementations selected");
    }
    for (const auto& impl : config.implementations) {
        const auto& names = gemm_implementation_names();
        if (std::find(names.begin(), names.end(), impl) == names.end()) {
            throw ConfigError("unknown implementation '" + impl + "' (valid: " + valid_impls() + ")");
        }
    }
    if (config.tile < 1) {
        throw ConfigError("gemm: tile must be >= 1");
    }
    if (config.threads < 1) {
        throw ConfigError("gemm: threads must be >= 1");
    }
    if (config.gpu_tile < 1 || config.gpu_workgroup.x < 1 || config.gpu_workgroup.y < 1) {
        throw ConfigError("gemm: GPU workgroup and tile must be >= 1");
    }
}

bool is_skipped(const GemmConfig& config, std::string_view impl, std::size_t n) {
    auto it = config.skip_rules.find(std::string(impl));
    return it != config.skip_rules.end() && n > it->second;
}

double gemm_gflops_best(std::size_t n, std::span<const double> times_s) {
    return gflops_rate(gemm_flops(n), best_time(times_s));
}

double gemm_gflops_mean(std::size_t n, std::span<const double> times_s) {
    if (times_s.empty()) {
        throw std::invalid_argument("gemm_gflops_mean: no samples");
    }
    const double mean = std::accumulate(times_s.begin(), times_s.end(), 0.0) / static_cast<double>(times_s.size());
    return gflops_rate(gemm_flops(n), mean);
}

std::vector<GemmResult> run_gemm_suite(const GemmConfig& config, const GemmBackends& backends,
                                       const GemmHooks& hooks) {
    validate_config(config);
    if (backends.gpu != nullptr) {
        // Reject unusable dispatch shapes before any cell runs.
        for (const auto& impl : config.implementations) {
            if (!is_gpu_implementation(impl)) {
                continue;
            }
            const auto variant = impl == kImplGpuNaive ? gpu::GemmVariant::Naive : gpu::GemmVariant::Tiled;
            for (std::size_t n : config.sizes) {
                if (is_skipped(config, impl, n)) {
                    continue;
                }
                const auto plan = config.fixed_grid ? gpu::fixed_grid_plan(n)
                                                    : gpu::default_gemm_plan(n, variant, config.gpu_workgroup,
                                                                             config.gpu_tile);
                const auto dim = static_cast<std::uint32_t>(n);
                gpu::validate_plan(plan, {dim, dim}, backends.gpu->info().limits);
            }
        }
    }
    std::vector<GemmResult> results;
    std::optional<WorkerPool> pool;

    for (std::size_t n : config.sizes) {
        MatrixF32 a = generate_matrix(n, config.seed);
        MatrixF32 b = generate_matrix(n, config.seed + 1);
        OracleCache oracle;
        const bool verify = config.verify_all || n <= config.verify_max_n;

        for (const auto& impl : config.implementations) {
            if (is_skipped(config, impl, n)) {
                continue;
            }
            GemmResult r;
            r.implementation = impl;
            r.n = n;

            MatrixF32 c(n);
            if (impl == kImplNaive) {
                r.times_s = time_repetitions(config, impl, n, hooks, [&] {
                    Stopwatch sw;
                    gemm_naive_into(a, b, c);
                    return sw.elapsed_s();
                });
            } else if (impl == kImplTiled) {
                if (!pool) {
                    pool.emplace(config.threads);
                }
                r.times_s = time_repetitions(config, impl, n, hooks, [&] {
                    Stopwatch sw;
                    gemm_tiled_into(a, b, c, config.tile, *pool, config.threads);
                    return sw.elapsed_s();
                });
            } else if (impl == kImplExternal) {
                if (backends.provider == nullptr || !backends.provider->available()) {
                    r.status = kStatusSkippedProvider;
                } else {
                    r.times_s = time_repetitions(config, impl, n, hooks, [&] {
                        Stopwatch sw;
                        backends.provider->multiply(a, b, c);
                        return sw.elapsed_s();
                    });
                }
            } else if (is_gpu_implementation(impl)) {
                if (backends.gpu == nullptr) {
                    r.status = kStatusSkippedNoGpu;
                } else {
                    auto& ctx = *backends.gpu;
                    const auto variant = impl == kImplGpuNaive ? gpu::GemmVariant::Naive : gpu::GemmVariant::Tiled;
                    const gpu::DispatchPlan plan =
                        config.fixed_grid ? gpu::fixed_grid_plan(n)
                                          : gpu::default_gemm_plan(n, variant, config.gpu_workgroup, config.gpu_tile);
                    // The device wraps the same page-aligned host matrices the
                    // CPU implementations use.
                    auto ba = gpu::wrap_shared(ctx, a.buffer().bytes());
                    auto bb = gpu::wrap_shared(ctx, b.buffer().bytes());
                    auto bc = gpu::wrap_shared(ctx, c.buffer().bytes());
                    r.copy_mode = std::string(gpu::to_string(bc.copy_mode()));
                    gpu::dispatch_gemm(ctx, variant, ba, bb, bc, n, plan); // warm-up
                    r.times_s = time_repetitions(config, impl, n, hooks, [&] {
                        return gpu::dispatch_gemm(ctx, variant, ba, bb, bc, n, plan);
                    });
                    // Host view access brings staged results back before verification.
                    (void)std::as_const(bc).host_view<float>();
                }
            }

            if (!r.times_s.empty()) {
                r.gflops_best = gemm_gflops_best(n, r.times_s);
                if (verify) {
                    const MatrixF32& ref = impl == kImplNaive ? c : oracle.get(a, b);
                    const GemmVerification v = verify_gemm(c, ref, a, b);
                    r.verified = v.passed;
                    r.max_abs_error = v.max_abs_error;
                    if (!v.passed) {
                        r.status = kStatusVerifyFailed;
                    }
                }
            }
            if (hooks.on_result) {
                hooks.on_result(r);
            }
            results.push_back(std::move(r));
        }
    }
    return results;
}

} // namespace unibench

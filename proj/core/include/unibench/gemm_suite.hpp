#pragma once

#include "unibench/gemm.hpp"
#include "unibench/gemm_provider.hpp"
#include "unibench/gpu_runner.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unibench {

// Implementation ids accepted by --impls.
inline constexpr std::string_view kImplNaive = "naive";
inline constexpr std::string_view kImplTiled = "tiled";
inline constexpr std::string_view kImplExternal = "external";
inline constexpr std::string_view kImplGpuNaive = "gpu-naive";
inline constexpr std::string_view kImplGpuTiled = "gpu-tiled";

const std::vector<std::string>& gemm_implementation_names();
bool is_gpu_implementation(std::string_view impl);

// Parses "naive,tiled". Throws ConfigError listing valid names on an unknown id.
std::vector<std::string> parse_implementation_list(std::string_view text);
// Parses "32,64,128". Throws ConfigError on malformed or non-power-of-two sizes.
std::vector<std::size_t> parse_size_list(std::string_view text);

inline constexpr std::string_view kStatusOk = "ok";
inline constexpr std::string_view kStatusVerifyFailed = "verify-failed";
inline constexpr std::string_view kStatusSkippedProvider = "skipped(provider)";
inline constexpr std::string_view kStatusSkippedNoGpu = "skipped(no-gpu)";

struct GemmConfig {
    std::vector<std::size_t> sizes = {32, 64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384};
    std::size_t repetitions = 5;
    std::vector<std::string> implementations = {"naive", "tiled", "external", "gpu-naive", "gpu-tiled"};
    // Largest n each implementation runs; absent means unlimited.
    std::map<std::string, std::size_t> skip_rules = {{"naive", 4096}, {"tiled", 4096}};
    std::uint64_t seed = 42;
    std::size_t tile = 64;
    std::size_t threads = 1;
    bool verify_all = false;
    std::size_t verify_max_n = 1024;
    // GPU dispatch shape.
    gpu::Dim2 gpu_workgroup = gpu::kDefaultGemmWorkgroup;
    std::uint32_t gpu_tile = gpu::kDefaultShaderTile;
    bool fixed_grid = false;
};

// Throws ConfigError on the first violated invariant.
void validate_config(const GemmConfig& config);

// True when skip_rules exclude (impl, n).
bool is_skipped(const GemmConfig& config, std::string_view impl, std::size_t n);

struct GemmResult {
    std::string implementation;
    std::size_t n = 0;
    std::vector<double> times_s;
    double gflops_best = 0.0;
    bool verified = false;
    std::string status{kStatusOk};
    double max_abs_error = 0.0;
    // For GPU cells: "zero-copy" or "staged". Empty for CPU cells.
    std::string copy_mode;

    bool operator==(const GemmResult&) const = default;
};

// gemm_flops(n) / min(times) * 1e-9, the gflops_best of a cell.
double gemm_gflops_best(std::size_t n, std::span<const double> times_s);
// gemm_flops(n) / mean(times) * 1e-9.
double gemm_gflops_mean(std::size_t n, std::span<const double> times_s);

struct GemmRepetition {
    std::string_view implementation;
    std::size_t n;
    std::size_t repetition;
};

// Observation points around every timed multiply. `after` receives the
// repetition's wall time.
struct GemmHooks {
    std::function<void(const GemmRepetition&)> before_repetition;
    std::function<void(const GemmRepetition&, double seconds)> after_repetition;
    std::function<void(const GemmResult&)> on_result;
};

struct GemmBackends {
    const GemmProvider* provider = nullptr;
    gpu::GpuContext* gpu = nullptr;
};

// Runs every (implementation, size) cell not excluded by skip_rules. Cells
// whose backend is missing are reported as skipped rather than omitted.
std::vector<GemmResult> run_gemm_suite(const GemmConfig& config, const GemmBackends& backends,
                                       const GemmHooks& hooks = {});

} // namespace unibench

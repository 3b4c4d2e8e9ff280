#pragma once

#include "unibench/gemm_suite.hpp"
#include "unibench/power_monitor.hpp"
#include "unibench/stream.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace unibench::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

struct RunConfig {
    bool run_stream = false;
    bool run_gemm = false;
    std::optional<std::string> chip_id;
    std::string device;
    std::string memory;
    std::string cooling = "unspecified";
    StreamConfig stream;
    GemmConfig gemm;
    std::size_t gpu_stream_reps = 20;
    std::string gpu_backend = "auto";
    std::string provider;
    SamplerConfig sampler;
    std::filesystem::path out_dir = ".";
    bool keep_awake = false;
    bool dry_run = false;
};

// Parses "16x16". Throws ConfigError.
gpu::Dim2 parse_workgroup(std::string_view text);

// Throws ConfigError on the first violated invariant.
void validate_run_config(const RunConfig& config);

// Resolved configuration as pretty-printed JSON.
std::string describe(const RunConfig& config);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace unibench::cli

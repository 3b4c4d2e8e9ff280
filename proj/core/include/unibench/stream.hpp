#pragma once

#include "unibench/aligned_buffer.hpp"
#include "unibench/worker_pool.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unibench {

enum class StreamKernel { Copy, Scale, Add, Triad };

inline constexpr std::array<StreamKernel, 4> kStreamKernels = {
    StreamKernel::Copy, StreamKernel::Scale, StreamKernel::Add, StreamKernel::Triad};

std::string_view to_string(StreamKernel kernel);
std::optional<StreamKernel> parse_stream_kernel(std::string_view name);

// Environment variable holding a comma-separated thread sweep override.
inline constexpr const char* kThreadsEnvVar = "UNIBENCH_THREADS";

struct StreamConfig {
    std::size_t n_elements = std::size_t{1} << 23;
    std::size_t elem_bytes = 4;
    double scalar_q = 3.0;
    // Includes the discarded warm-up iteration.
    std::size_t repetitions = 10;
    std::vector<std::size_t> thread_counts = {1};
    // Last-level cache size; the working set must exceed 4x this. 0 disables
    // the check.
    std::uint64_t cache_hint_bytes = 0;

    [[nodiscard]] std::size_t max_threads() const;
};

// Throws ConfigError describing the first violated invariant.
void validate_config(const StreamConfig& config);

// 2^25 elements when the host has >= 8 GB of RAM, else 2^23.
std::size_t default_stream_elements(std::uint64_t physical_memory_bytes);

// Parses "1,2,4". Throws ConfigError on empty, zero or malformed entries.
std::vector<std::size_t> parse_thread_list(std::string_view text);

// 1..physical_cores unless UNIBENCH_THREADS is set.
std::vector<std::size_t> default_thread_sweep(std::size_t physical_cores);

// Three page-aligned arrays of n elements of 4 or 8 bytes each.
class StreamArrays {
public:
    StreamArrays(std::size_t n_elements, std::size_t elem_bytes);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t elem_bytes() const noexcept { return elem_bytes_; }

    // T must match elem_bytes (float for 4, double for 8).
    template <typename T> std::span<T> a() { return typed<T>(a_); }
    template <typename T> std::span<T> b() { return typed<T>(b_); }
    template <typename T> std::span<T> c() { return typed<T>(c_); }
    template <typename T> std::span<const T> a() const { return typed<T>(a_); }
    template <typename T> std::span<const T> b() const { return typed<T>(b_); }
    template <typename T> std::span<const T> c() const { return typed<T>(c_); }

    [[nodiscard]] const AlignedBuffer& buffer_a() const noexcept { return a_; }
    [[nodiscard]] const AlignedBuffer& buffer_b() const noexcept { return b_; }
    [[nodiscard]] const AlignedBuffer& buffer_c() const noexcept { return c_; }

    // a = 1, b = 2, c = 0.
    void reset();

private:
    template <typename T> std::span<T> typed(AlignedBuffer& buf);
    template <typename T> std::span<const T> typed(const AlignedBuffer& buf) const;

    std::size_t n_;
    std::size_t elem_bytes_;
    AlignedBuffer a_;
    AlignedBuffer b_;
    AlignedBuffer c_;
};

// Allocates and initializes the arrays. Throws ConfigError for n == 0 or an
// unsupported element size.
StreamArrays stream_init(const StreamConfig& config);

// Bytes read plus written by one kernel invocation.
std::uint64_t bytes_moved(StreamKernel kernel, std::uint64_t n_elements, std::uint64_t elem_bytes);

// Executes STREAM kernels on a fixed worker pool with static contiguous
// partitioning.
class StreamRunner {
public:
    explicit StreamRunner(std::size_t max_threads);

    [[nodiscard]] std::size_t max_threads() const noexcept { return pool_.size(); }

    // Returns kernel wall time in seconds. Throws std::invalid_argument when
    // threads is outside [1, max_threads()].
    double run_kernel(StreamKernel kernel, StreamArrays& arrays, double q, std::size_t threads);

private:
    WorkerPool pool_;
};

// Element-wise kernel application over [begin, end); shared by the CPU
// runner and the emulated GPU device.
void apply_stream_kernel(StreamKernel kernel, std::span<float> a, std::span<float> b, std::span<float> c,
                         float q, std::size_t begin, std::size_t end);
void apply_stream_kernel(StreamKernel kernel, std::span<double> a, std::span<double> b, std::span<double> c,
                         double q, std::size_t begin, std::size_t end);

struct StreamExpected {
    double a = 1.0;
    double b = 2.0;
    double c = 0.0;
};

// Scalar recurrence for `iterations` full Copy/Scale/Add/Triad sequences,
// evaluated in the element precision.
StreamExpected stream_expected(std::size_t iterations, double q, std::size_t elem_bytes);

struct StreamValidation {
    bool passed = true;
    StreamExpected expected;
    // Worst relative error per array (a, b, c).
    std::array<double, 3> max_rel_error{};
    // Empty when passed; otherwise "a", "b" or "c".
    std::string failing_array;
    std::size_t failing_index = 0;
    double observed = 0.0;
    std::string message;
};

// Relative tolerance: 1e-6 for 4-byte elements, 1e-13 for 8-byte elements.
double stream_tolerance(std::size_t elem_bytes);

StreamValidation validate_stream(const StreamArrays& arrays, std::size_t iterations, double q);
StreamValidation validate_stream(std::span<const float> a, std::span<const float> b, std::span<const float> c,
                                 std::size_t iterations, double q);

// Timed samples for one (kernel, thread count) cell. `times_s` excludes the
// discarded warm-up iteration. threads == 0 denotes a GPU device run.
struct KernelSample {
    StreamKernel kernel = StreamKernel::Copy;
    std::size_t threads = 0;
    std::vector<double> times_s;
    double best_time_s = 0.0;
    double best_bandwidth_gbs = 0.0;

    bool operator==(const KernelSample&) const = default;
};

KernelSample summarize_kernel(StreamKernel kernel, std::size_t threads, std::uint64_t bytes,
                              std::vector<double> times_s);

struct StreamResult {
    std::size_t n_elements = 0;
    std::size_t elem_bytes = 4;
    std::size_t repetitions = 0;
    double scalar_q = 3.0;
    std::vector<KernelSample> samples;
    bool validation_passed = false;
    std::string validation_message;

    // Max best_bandwidth_gbs across thread counts for the kernel.
    [[nodiscard]] std::optional<double> headline_gbs(StreamKernel kernel) const;

    bool operator==(const StreamResult&) const = default;
};

using StreamProgress = std::function<void(const KernelSample&)>;

// Full sweep: for each thread count the arrays are reinitialized and
// `repetitions` Copy/Scale/Add/Triad sequences run; the first is discarded.
// Validation covers the final thread count's arrays. A validation failure is
// recorded in the result, not thrown.
StreamResult run_stream_suite(const StreamConfig& config, const StreamProgress& progress = {});

} // namespace unibench

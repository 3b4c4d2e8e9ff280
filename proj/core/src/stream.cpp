#include "unibench/stream.hpp"

#include "unibench/errors.hpp"
#include "unibench/timing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace unibench {

std::string_view to_string(StreamKernel kernel) {
    switch (kernel) {
    case StreamKernel::Copy: return "Copy";
    case StreamKernel::Scale: return "Scale";
    case StreamKernel::Add: return "Add";
    case StreamKernel::Triad: return "Triad";
    }
    return "?";
}

std::optional<StreamKernel> parse_stream_kernel(std::string_view name) {
    for (auto k : kStreamKernels) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

std::size_t StreamConfig::max_threads() const {
    if (thread_counts.empty()) {
        return 1;
    }
    return *std::max_element(thread_counts.begin(), thread_counts.end());
}

void validate_config(const StreamConfig& config) {
    if (config.n_elements == 0) {
        throw ConfigError("stream: n_elements must be > 0");
    }
    if (config.elem_bytes != 4 && config.elem_bytes != 8) {
        throw ConfigError("stream: elem_bytes must be 4 or 8");
    }
    if (config.repetitions < 2) {
        throw ConfigError("stream: repetitions must be >= 2 (the first is a warm-up)");
    }
    if (config.thread_counts.empty()) {
        throw ConfigError("stream: thread_counts must not be empty");
    }
    for (auto t : config.thread_counts) {
        if (t == 0) {
            throw ConfigError("stream: thread counts must be >= 1");
        }
    }
    if (config.cache_hint_bytes > 0) {
        const auto working_set = static_cast<std::uint64_t>(config.n_elements) * config.elem_bytes * 3;
        if (working_set <= 4 * config.cache_hint_bytes) {
            std::ostringstream os;
            os << "stream: working set of " << working_set << " bytes does not exceed 4x the "
               << config.cache_hint_bytes << "-byte cache hint; raise --stream-n or lower --cache-mb";
            throw ConfigError(os.str());
        }
    }
}

std::size_t default_stream_elements(std::uint64_t physical_memory_bytes) {
    constexpr std::uint64_t kEightGb = 8ull * 1000 * 1000 * 1000;
    return physical_memory_bytes >= kEightGb ? (std::size_t{1} << 25) : (std::size_t{1} << 23);
}

std::vector<std::size_t> parse_thread_list(std::string_view text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        std::string_view item = text.substr(pos, comma - pos);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || value == 0) {
            throw ConfigError("invalid thread list '" + std::string(text) + "'");
        }
        out.push_back(value);
        pos = comma + 1;
    }
    return out;
}

std::vector<std::size_t> default_thread_sweep(std::size_t physical_cores) {
    if (const char* env = std::getenv(kThreadsEnvVar); env != nullptr && *env != '\0') {
        return parse_thread_list(env);
    }
    std::vector<std::size_t> out;
    for (std::size_t t = 1; t <= std::max<std::size_t>(physical_cores, 1); ++t) {
        out.push_back(t);
    }
    return out;
}

// --- StreamArrays -----------------------------------------------------------

StreamArrays::StreamArrays(std::size_t n_elements, std::size_t elem_bytes)
    : n_(n_elements), elem_bytes_(elem_bytes) {
    if (n_elements == 0) {
        throw ConfigError("stream: n_elements must be > 0");
    }
    if (elem_bytes != 4 && elem_bytes != 8) {
        throw ConfigError("stream: elem_bytes must be 4 or 8");
    }
    a_ = AlignedBuffer(n_ * elem_bytes_);
    b_ = AlignedBuffer(n_ * elem_bytes_);
    c_ = AlignedBuffer(n_ * elem_bytes_);
    reset();
}

template <typename T>
std::span<T> StreamArrays::typed(AlignedBuffer& buf) {
    if (sizeof(T) != elem_bytes_) {
        throw std::logic_error("StreamArrays: element type does not match elem_bytes");
    }
    return buf.as<T>(n_);
}

template <typename T>
std::span<const T> StreamArrays::typed(const AlignedBuffer& buf) const {
    if (sizeof(T) != elem_bytes_) {
        throw std::logic_error("StreamArrays: element type does not match elem_bytes");
    }
    return buf.as<T>(n_);
}

template std::span<float> StreamArrays::typed<float>(AlignedBuffer&);
template std::span<double> StreamArrays::typed<double>(AlignedBuffer&);
template std::span<const float> StreamArrays::typed<float>(const AlignedBuffer&) const;
template std::span<const double> StreamArrays::typed<double>(const AlignedBuffer&) const;

void StreamArrays::reset() {
    auto fill = [this]<typename T>(T) {
        std::ranges::fill(a<T>(), T(1));
        std::ranges::fill(b<T>(), T(2));
        std::ranges::fill(c<T>(), T(0));
    };
    if (elem_bytes_ == 4) {
        fill(float{});
    } else {
        fill(double{});
    }
}

StreamArrays stream_init(const StreamConfig& config) {
    return StreamArrays(config.n_elements, config.elem_bytes);
}

std::uint64_t bytes_moved(StreamKernel kernel, std::uint64_t n_elements, std::uint64_t elem_bytes) {
    switch (kernel) {
    case StreamKernel::Copy:
    case StreamKernel::Scale: return 2 * n_elements * elem_bytes;
    case StreamKernel::Add:
    case StreamKernel::Triad: return 3 * n_elements * elem_bytes;
    }
    return 0;
}

// --- kernels ----------------------------------------------------------------

namespace {

template <typename T>
void apply_kernel(StreamKernel kernel, T* __restrict a, T* __restrict b, T* __restrict c, T q,
                  std::size_t begin, std::size_t end) {
    switch (kernel) {
    case StreamKernel::Copy:
        for (std::size_t i = begin; i < end; ++i) c[i] = a[i];
        break;
    case StreamKernel::Scale:
        for (std::size_t i = begin; i < end; ++i) b[i] = q * c[i];
        break;
    case StreamKernel::Add:
        for (std::size_t i = begin; i < end; ++i) c[i] = a[i] + b[i];
        break;
    case StreamKernel::Triad:
        for (std::size_t i = begin; i < end; ++i) a[i] = b[i] + q * c[i];
        break;
    }
}

template <typename T>
void check_spans(std::span<T> a, std::span<T> b, std::span<T> c, std::size_t end) {
    if (a.size() < end || b.size() < end || c.size() < end) {
        throw std::out_of_range("stream kernel range exceeds array length");
    }
}

} // namespace

void apply_stream_kernel(StreamKernel kernel, std::span<float> a, std::span<float> b, std::span<float> c,
                         float q, std::size_t begin, std::size_t end) {
    check_spans(a, b, c, end);
    apply_kernel(kernel, a.data(), b.data(), c.data(), q, begin, end);
}

void apply_stream_kernel(StreamKernel kernel, std::span<double> a, std::span<double> b, std::span<double> c,
                         double q, std::size_t begin, std::size_t end) {
    check_spans(a, b, c, end);
    apply_kernel(kernel, a.data(), b.data(), c.data(), q, begin, end);
}

StreamRunner::StreamRunner(std::size_t max_threads) : pool_(max_threads) {}

double StreamRunner::run_kernel(StreamKernel kernel, StreamArrays& arrays, double q, std::size_t threads) {
    if (threads == 0 || threads > pool_.size()) {
        throw std::invalid_argument("run_kernel: thread count outside [1, max_threads]");
    }
    const std::size_t n = arrays.size();
    std::function<void(std::size_t)> job;
    if (arrays.elem_bytes() == 4) {
        job = [&, a = arrays.a<float>(), b = arrays.b<float>(), c = arrays.c<float>(),
               qf = static_cast<float>(q)](std::size_t w) {
            const Chunk ch = static_chunk(n, threads, w);
            apply_kernel(kernel, a.data(), b.data(), c.data(), qf, ch.begin, ch.end);
        };
    } else {
        job = [&, a = arrays.a<double>(), b = arrays.b<double>(), c = arrays.c<double>()](std::size_t w) {
            const Chunk ch = static_chunk(n, threads, w);
            apply_kernel(kernel, a.data(), b.data(), c.data(), q, ch.begin, ch.end);
        };
    }
    Stopwatch sw;
    pool_.run(threads, job);
    return sw.elapsed_s();
}

// --- validation -------------------------------------------------------------

namespace {

template <typename T>
StreamExpected expected_in(std::size_t iterations, T q) {
    T a = 1, b = 2, c = 0;
    for (std::size_t k = 0; k < iterations; ++k) {
        c = a;
        b = q * c;
        c = a + b;
        a = b + q * c;
    }
    return {static_cast<double>(a), static_cast<double>(b), static_cast<double>(c)};
}

double rel_error(double expected, double observed) {
    if (expected == observed) {
        return 0.0;
    }
    const double denom = std::fabs(expected);
    return denom == 0.0 ? std::fabs(observed) : std::fabs(observed - expected) / denom;
}

template <typename T>
void check_array(std::span<const T> values, double expected, std::size_t which, StreamValidation& v) {
    double worst = 0.0;
    std::size_t worst_index = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double e = rel_error(expected, static_cast<double>(values[i]));
        if (!(e <= worst)) {
            worst = e;
            worst_index = i;
        }
    }
    v.max_rel_error[which] = worst;
    if (v.failing_array.empty() && !(worst <= stream_tolerance(sizeof(T)))) {
        static constexpr const char* names[] = {"a", "b", "c"};
        v.passed = false;
        v.failing_array = names[which];
        v.failing_index = worst_index;
        v.observed = static_cast<double>(values[worst_index]);
        std::ostringstream os;
        os.precision(9);
        os << "array " << names[which] << " failed validation at index " << worst_index << ": expected "
           << expected << ", observed " << v.observed << " (relative error " << worst << ")";
        v.message = os.str();
    }
}

} // namespace

StreamExpected stream_expected(std::size_t iterations, double q, std::size_t elem_bytes) {
    return elem_bytes == 4 ? expected_in<float>(iterations, static_cast<float>(q))
                           : expected_in<double>(iterations, q);
}

double stream_tolerance(std::size_t elem_bytes) {
    return elem_bytes == 4 ? 1e-6 : 1e-13;
}

StreamValidation validate_stream(const StreamArrays& arrays, std::size_t iterations, double q) {
    StreamValidation v;
    v.expected = stream_expected(iterations, q, arrays.elem_bytes());
    auto check_all = [&]<typename T>(T) {
        check_array<T>(arrays.a<T>(), v.expected.a, 0, v);
        check_array<T>(arrays.b<T>(), v.expected.b, 1, v);
        check_array<T>(arrays.c<T>(), v.expected.c, 2, v);
    };
    if (arrays.elem_bytes() == 4) {
        check_all(float{});
    } else {
        check_all(double{});
    }
    return v;
}

StreamValidation validate_stream(std::span<const float> a, std::span<const float> b, std::span<const float> c,
                                 std::size_t iterations, double q) {
    StreamValidation v;
    v.expected = stream_expected(iterations, q, sizeof(float));
    check_array<float>(a, v.expected.a, 0, v);
    check_array<float>(b, v.expected.b, 1, v);
    check_array<float>(c, v.expected.c, 2, v);
    return v;
}

// --- suite ------------------------------------------------------------------

KernelSample summarize_kernel(StreamKernel kernel, std::size_t threads, std::uint64_t bytes,
                              std::vector<double> times_s) {
    KernelSample s;
    s.kernel = kernel;
    s.threads = threads;
    s.best_time_s = best_time(times_s);
    s.best_bandwidth_gbs = bandwidth_gbs(bytes, s.best_time_s);
    s.times_s = std::move(times_s);
    return s;
}

std::optional<double> StreamResult::headline_gbs(StreamKernel kernel) const {
    std::optional<double> best;
    for (const auto& s : samples) {
        if (s.kernel == kernel && (!best || s.best_bandwidth_gbs > *best)) {
            best = s.best_bandwidth_gbs;
        }
    }
    return best;
}

StreamResult run_stream_suite(const StreamConfig& config, const StreamProgress& progress) {
    validate_config(config);

    StreamResult result;
    result.n_elements = config.n_elements;
    result.elem_bytes = config.elem_bytes;
    result.repetitions = config.repetitions;
    result.scalar_q = config.scalar_q;

    StreamArrays arrays = stream_init(config);
    StreamRunner runner(config.max_threads());

    for (std::size_t threads : config.thread_counts) {
        arrays.reset();
        std::array<std::vector<double>, 4> times;
        for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
            for (std::size_t k = 0; k < kStreamKernels.size(); ++k) {
                const double t = runner.run_kernel(kStreamKernels[k], arrays, config.scalar_q, threads);
                if (rep > 0) {
                    times[k].push_back(t);
                }
            }
        }
        for (std::size_t k = 0; k < kStreamKernels.size(); ++k) {
            const auto bytes = bytes_moved(kStreamKernels[k], config.n_elements, config.elem_bytes);
            result.samples.push_back(summarize_kernel(kStreamKernels[k], threads, bytes, std::move(times[k])));
            if (progress) {
                progress(result.samples.back());
            }
        }
    }

    const StreamValidation v = validate_stream(arrays, config.repetitions, config.scalar_q);
    result.validation_passed = v.passed;
    result.validation_message = v.passed ? "ok" : v.message;
    return result;
}

} // namespace unibench

#pragma once

#include <chrono>
#include <cstdint>
#include <span>

namespace unibench {

using BenchClock = std::chrono::steady_clock;

// Wall-clock interval at nanosecond granularity, reported in seconds.
class Stopwatch {
public:
    Stopwatch() : start_(BenchClock::now()) {}
    void restart() { start_ = BenchClock::now(); }
    [[nodiscard]] double elapsed_s() const {
        const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(BenchClock::now() - start_);
        return static_cast<double>(ns.count()) * 1e-9;
    }

private:
    BenchClock::time_point start_;
};

// Best-of-N: smallest positive sample. Throws std::invalid_argument on an
// empty set or a non-positive sample.
double best_time(std::span<const double> times_s);

// Decimal units: GB/s = bytes / s / 1e9, GFLOPS = flops / s / 1e9.
double bandwidth_gbs(std::uint64_t bytes, double seconds);
double gflops_rate(std::uint64_t flops, double seconds);

} // namespace unibench

#include "unibench/timing.hpp"

#include <algorithm>
#include <stdexcept>

namespace unibench {

double best_time(std::span<const double> times_s) {
    if (times_s.empty()) {
        throw std::invalid_argument("best_time: no samples");
    }
    const double best = *std::min_element(times_s.begin(), times_s.end());
    if (!(best > 0.0)) {
        throw std::invalid_argument("best_time: samples must be positive");
    }
    return best;
}

double bandwidth_gbs(std::uint64_t bytes, double seconds) {
    if (!(seconds > 0.0)) {
        throw std::invalid_argument("bandwidth_gbs: seconds must be positive");
    }
    return static_cast<double>(bytes) / seconds / 1e9;
}

double gflops_rate(std::uint64_t flops, double seconds) {
    if (!(seconds > 0.0)) {
        throw std::invalid_argument("gflops_rate: seconds must be positive");
    }
    return static_cast<double>(flops) / seconds / 1e9;
}

} // namespace unibench

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace unibench {

template <typename T>
struct Range {
    T min{};
    T max{};
    bool operator==(const Range&) const = default;
};

// Vendor specification for one chip. Bandwidth is in decimal GB/s (1e9 B/s).
struct DeviceSpec {
    std::string chip_id;
    int process_nm = 0;
    int perf_cores = 0;
    int eff_cores = 0;
    double cpu_clock_ghz_p = 0.0;
    double cpu_clock_ghz_e = 0.0;
    Range<int> gpu_cores;
    double gpu_clock_ghz = 0.0;
    Range<double> fp32_tflops;
    std::string mem_technology;
    std::vector<int> mem_gb_options;
    double mem_bandwidth_gbs = 0.0;

    bool operator==(const DeviceSpec&) const = default;
};

// Which end of a ranged peak is used as the efficiency denominator.
enum class PeakChoice { Max, Min };

double fp32_peak_gflops(const DeviceSpec& spec, PeakChoice choice = PeakChoice::Max);

class Catalog {
public:
    Catalog() = default;
    Catalog(std::map<std::string, DeviceSpec, std::less<>> entries, std::string source_path);

    [[nodiscard]] const DeviceSpec* find(std::string_view chip_id) const;
    // Throws std::out_of_range naming the chip when absent.
    [[nodiscard]] const DeviceSpec& at(std::string_view chip_id) const;
    [[nodiscard]] const std::map<std::string, DeviceSpec, std::less<>>& entries() const { return entries_; }
    [[nodiscard]] const std::string& source_path() const { return source_path_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

    bool operator==(const Catalog&) const = default;

private:
    std::map<std::string, DeviceSpec, std::less<>> entries_;
    std::string source_path_;
};

// Parses catalog text (a JSON array of records with exactly the documented
// keys). Throws SchemaError naming the offending record and field, or on a
// duplicate chip_id.
Catalog parse_catalog(std::string_view text, std::string source_path = "<memory>");

// Reads and parses a catalog file. Throws SchemaError for missing files too.
Catalog load_catalog(const std::filesystem::path& path);

// Resolves the shipped catalog: $UNIBENCH_CATALOG, then the install data
// directory, then the source tree.
std::filesystem::path default_catalog_path();

// The record keys, in canonical order.
const std::vector<std::string_view>& catalog_keys();

// measured / peak. Throws DomainError when peak <= 0 or measured < 0.
double efficiency_ratio(double measured, double peak);

} // namespace unibench

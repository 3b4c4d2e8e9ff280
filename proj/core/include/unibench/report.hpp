#pragma once

#include "unibench/archive.hpp"
#include "unibench/device_catalog.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace unibench {

struct BandwidthRow {
    StreamKernel kernel = StreamKernel::Copy;
    std::optional<double> cpu_gbs;
    std::optional<double> gpu_gbs;
    std::optional<double> peak_gbs;
    std::optional<double> cpu_ratio;
    std::optional<double> gpu_ratio;
};

struct GflopsRow {
    std::string implementation;
    std::size_t n = 0;
    std::string status;
    std::optional<double> gflops_best;
    std::optional<double> gflops_mean;
    std::optional<double> peak_ratio;
};

// Power drawn during one (implementation, n) cell, averaged over its
// repetition windows.
struct PowerRow {
    std::string implementation;
    std::size_t n = 0;
    std::optional<double> cpu_w;
    std::optional<double> gpu_w;
    std::optional<double> energy_j;
    // Best repetition.
    std::optional<double> gflops_per_watt;
};

struct Headline {
    std::optional<double> gflops;
    std::size_t gflops_n = 0;
    std::optional<double> peak_ratio;
    std::optional<double> gflops_per_watt;
};

struct EfficiencyReport {
    std::string chip_id;
    bool peaks_available = false;
    PeakChoice peak_choice = PeakChoice::Max;
    std::optional<double> peak_bandwidth_gbs;
    std::optional<double> peak_fp32_gflops;
    std::vector<BandwidthRow> bandwidth;
    std::vector<GflopsRow> gflops;
    std::vector<PowerRow> power;
    std::map<std::string, Headline> headlines;
    std::string power_status;
};

// Joins an archive with catalog peaks. Unknown chips yield a report whose
// ratios are absent.
EfficiencyReport build_efficiency_report(const RunArchive& archive, const Catalog& catalog,
                                         PeakChoice choice = PeakChoice::Max);

enum class PlotKind { Bandwidth, Gflops, Power, Efficiency };
std::string_view to_string(PlotKind kind);

// Tab-separated, one header line. Missing values are written "unavailable".
std::string render_plot_data(const EfficiencyReport& report, PlotKind kind);
void emit_plot_data(const EfficiencyReport& report, PlotKind kind, const std::filesystem::path& path);

// Human-readable summary for the terminal.
std::string render_summary(const EfficiencyReport& report);

} // namespace unibench

#include "unibench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace unibench {

namespace {

constexpr const char* kUnavailable = "unavailable";

std::string fmt(double v, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

std::string fmt(const std::optional<double>& v, int precision = 4) {
    return v ? fmt(*v, precision) : kUnavailable;
}

std::string percent(const std::optional<double>& ratio) {
    return ratio ? fmt(*ratio * 100.0, 1) + "%" : "n/a";
}

std::optional<double> ratio_or_none(const std::optional<double>& measured, const std::optional<double>& peak) {
    if (!measured || !peak) {
        return std::nullopt;
    }
    return efficiency_ratio(*measured, *peak);
}

} // namespace

EfficiencyReport build_efficiency_report(const RunArchive& archive, const Catalog& catalog, PeakChoice choice) {
    EfficiencyReport report;
    report.chip_id = archive.machine.chip_id;
    report.peak_choice = choice;
    report.power_status = archive.power_status;
    if (const DeviceSpec* spec = catalog.find(archive.machine.chip_id)) {
        report.peaks_available = true;
        report.peak_bandwidth_gbs = spec->mem_bandwidth_gbs;
        report.peak_fp32_gflops = fp32_peak_gflops(*spec, choice);
    }

    for (auto kernel : kStreamKernels) {
        BandwidthRow row;
        row.kernel = kernel;
        if (archive.cpu_stream.result) {
            row.cpu_gbs = archive.cpu_stream.result->headline_gbs(kernel);
        }
        if (archive.gpu_stream.result) {
            row.gpu_gbs = archive.gpu_stream.result->headline_gbs(kernel);
        }
        row.peak_gbs = report.peak_bandwidth_gbs;
        row.cpu_ratio = ratio_or_none(row.cpu_gbs, row.peak_gbs);
        row.gpu_ratio = ratio_or_none(row.gpu_gbs, row.peak_gbs);
        report.bandwidth.push_back(row);
    }

    for (const auto& r : archive.gemm) {
        GflopsRow row;
        row.implementation = r.implementation;
        row.n = r.n;
        row.status = r.status;
        if (!r.times_s.empty()) {
            row.gflops_best = gemm_gflops_best(r.n, r.times_s);
            row.gflops_mean = gemm_gflops_mean(r.n, r.times_s);
            row.peak_ratio = ratio_or_none(row.gflops_best, report.peak_fp32_gflops);
            auto& h = report.headlines[r.implementation];
            if (!h.gflops || *row.gflops_best > *h.gflops) {
                h.gflops = row.gflops_best;
                h.gflops_n = r.n;
                h.peak_ratio = row.peak_ratio;
            }
        }
        report.gflops.push_back(std::move(row));
    }

    // Group repetition windows per (implementation, n), keeping first-seen order.
    std::vector<std::pair<BenchmarkKey, std::vector<const EnergyRecord*>>> groups;
    for (const auto& e : archive.energy) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
            return g.first.implementation == e.key.implementation && g.first.n == e.key.n;
        });
        if (it == groups.end()) {
            groups.push_back({BenchmarkKey{e.key.implementation, e.key.n, 0}, {}});
            it = std::prev(groups.end());
        }
        it->second.push_back(&e);
    }
    for (const auto& [key, records] : groups) {
        std::vector<PowerWindow> windows;
        PowerRow row;
        row.implementation = key.implementation;
        row.n = key.n;
        double energy = 0.0;
        for (const auto* e : records) {
            windows.push_back(e->window);
            energy += e->energy_j;
            if (e->gflops_per_watt && (!row.gflops_per_watt || *e->gflops_per_watt > *row.gflops_per_watt)) {
                row.gflops_per_watt = e->gflops_per_watt;
            }
        }
        const PowerWindow merged = merge_windows(windows);
        row.cpu_w = merged.cpu_w;
        row.gpu_w = merged.gpu_w;
        row.energy_j = energy;
        if (row.gflops_per_watt) {
            auto& h = report.headlines[key.implementation];
            if (!h.gflops_per_watt || *row.gflops_per_watt > *h.gflops_per_watt) {
                h.gflops_per_watt = row.gflops_per_watt;
            }
        }
        report.power.push_back(std::move(row));
    }
    return report;
}

std::string_view to_string(PlotKind kind) {
    switch (kind) {
    case PlotKind::Bandwidth: return "bandwidth";
    case PlotKind::Gflops: return "gflops";
    case PlotKind::Power: return "power";
    case PlotKind::Efficiency: return "efficiency";
    }
    return "?";
}

std::string render_plot_data(const EfficiencyReport& report, PlotKind kind) {
    std::ostringstream os;
    switch (kind) {
    case PlotKind::Bandwidth:
        os << "kernel\tcpu_gbs\tgpu_gbs\tpeak_gbs\n";
        for (const auto& r : report.bandwidth) {
            os << to_string(r.kernel) << '\t' << fmt(r.cpu_gbs) << '\t' << fmt(r.gpu_gbs) << '\t' << fmt(r.peak_gbs)
               << '\n';
        }
        break;
    case PlotKind::Gflops:
        os << "implementation\tn\tgflops_best\tgflops_mean\tstatus\n";
        for (const auto& r : report.gflops) {
            os << r.implementation << '\t' << r.n << '\t' << fmt(r.gflops_best) << '\t' << fmt(r.gflops_mean) << '\t'
               << r.status << '\n';
        }
        break;
    case PlotKind::Power:
        os << "implementation\tn\tcpu_w\tgpu_w\ttotal_w\n";
        if (report.power.empty()) {
            for (const auto& r : report.gflops) {
                os << r.implementation << '\t' << r.n << '\t' << kUnavailable << '\t' << kUnavailable << '\t'
                   << kUnavailable << '\n';
            }
        }
        for (const auto& r : report.power) {
            std::optional<double> total;
            if (r.cpu_w && r.gpu_w) {
                total = *r.cpu_w + *r.gpu_w;
            }
            os << r.implementation << '\t' << r.n << '\t' << fmt(r.cpu_w) << '\t' << fmt(r.gpu_w) << '\t'
               << fmt(total) << '\n';
        }
        break;
    case PlotKind::Efficiency:
        os << "implementation\tn\tgflops_per_watt\n";
        for (const auto& g : report.gflops) {
            std::optional<double> eff;
            for (const auto& p : report.power) {
                if (p.implementation == g.implementation && p.n == g.n) {
                    eff = p.gflops_per_watt;
                }
            }
            os << g.implementation << '\t' << g.n << '\t' << fmt(eff) << '\n';
        }
        break;
    }
    return os.str();
}

void emit_plot_data(const EfficiencyReport& report, PlotKind kind, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write plot data " + path.string());
    }
    out << render_plot_data(report, kind);
}

std::string render_summary(const EfficiencyReport& report) {
    std::ostringstream os;
    os << "chip: " << report.chip_id;
    if (!report.peaks_available) {
        os << " (not in catalog; ratios unavailable)";
    }
    os << "\n";
    if (report.peak_bandwidth_gbs) {
        os << "theoretical bandwidth: " << fmt(*report.peak_bandwidth_gbs, 1) << " GB/s, FP32 peak: "
           << fmt(*report.peak_fp32_gflops / 1000.0, 2) << " TFLOPS ("
           << (report.peak_choice == PeakChoice::Max ? "max" : "min") << " of range)\n";
    }
    os << "\nSTREAM best bandwidth (GB/s, decimal)\n";
    for (const auto& r : report.bandwidth) {
        os << "  " << to_string(r.kernel) << ":\tCPU " << (r.cpu_gbs ? fmt(*r.cpu_gbs, 2) : "-") << " ("
           << percent(r.cpu_ratio) << ")\tGPU " << (r.gpu_gbs ? fmt(*r.gpu_gbs, 2) : "-") << " ("
           << percent(r.gpu_ratio) << ")\n";
    }
    os << "\nGEMM headline (best over sizes)\n";
    if (report.headlines.empty()) {
        os << "  no GEMM results\n";
    }
    for (const auto& [impl, h] : report.headlines) {
        os << "  " << impl << ":\t";
        if (h.gflops) {
            os << fmt(*h.gflops, 2) << " GFLOPS at n=" << h.gflops_n << " (" << percent(h.peak_ratio)
               << " of FP32 peak)";
        } else {
            os << "no timed cells";
        }
        if (h.gflops_per_watt) {
            os << ", " << fmt(*h.gflops_per_watt, 2) << " GFLOPS/W";
        }
        os << "\n";
    }
    os << "\npower: " << report.power_status << "\n";
    return os.str();
}

} // namespace unibench

#include "cli.hpp"

#include "unibench/archive.hpp"
#include "unibench/device_catalog.hpp"
#include "unibench/errors.hpp"
#include "unibench/gemm.hpp"
#include "unibench/report.hpp"
#include "unibench/system_info.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <spawn.h>
#include <unistd.h>

extern char** environ;

namespace unibench::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        out += (out.empty() ? "" : ", ") + s;
    }
    return out;
}

// Raw flag text, converted and checked after parsing so that every bad value
// surfaces as a ConfigError.
struct RawFlags {
    std::string threads;
    std::optional<double> cache_mb;
    std::optional<std::size_t> stream_n;
    bool fp64 = false;
    std::string sizes;
    std::string impls;
    std::string workgroup;
    std::string sampler_signal;
    bool power = true;
    std::string in;
    std::string catalog = "default";
    std::string peak = "max";
};

void add_common(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
    sub.add_option("--chip", cfg.chip_id, "Chip id recorded in the archive (default: detected)");
    sub.add_option("--device", cfg.device, "Device description (default: CPU brand)");
    sub.add_option("--memory", cfg.memory, "Memory description (default: detected size)");
    sub.add_option("--cooling", cfg.cooling, "Cooling description")->capture_default_str();
    sub.add_flag("--dry-run", cfg.dry_run, "Print the resolved configuration and exit");
    sub.add_flag("--keep-awake", cfg.keep_awake, "Keep the machine awake with caffeinate when available");
    sub.add_option("--gpu-backend", cfg.gpu_backend, "GPU backend: " + join(gpu::backend_names()))
        ->capture_default_str();
}

void add_stream(CLI::App& sub, RunConfig& cfg, RawFlags& raw) {
    sub.add_option("--stream-n", raw.stream_n, "Elements per STREAM array (default: by RAM size)");
    sub.add_option("--stream-reps", cfg.stream.repetitions, "STREAM iterations including warm-up")
        ->capture_default_str();
    sub.add_option("--threads", raw.threads, "CPU thread sweep, e.g. 1,2,4 (default: 1..cores)");
    sub.add_option("--cache-mb", raw.cache_mb, "Last-level cache size for the working-set check; 0 disables");
    sub.add_flag("--fp64", raw.fp64, "Use 8-byte elements for CPU STREAM");
    sub.add_option("--gpu-reps", cfg.gpu_stream_reps, "GPU STREAM repetitions")->capture_default_str();
}

void add_gemm(CLI::App& sub, RunConfig& cfg, RawFlags& raw) {
    sub.add_option("--sizes", raw.sizes, "Matrix sizes, powers of two");
    sub.add_option("--impls", raw.impls, "Implementations: " + join(gemm_implementation_names()));
    sub.add_option("--reps", cfg.gemm.repetitions, "Timed repetitions per cell")->capture_default_str();
    sub.add_option("--tile", cfg.gemm.tile, "CPU tile edge")->capture_default_str();
    sub.add_option("--seed", cfg.gemm.seed, "Matrix seed")->capture_default_str();
    sub.add_option("--gemm-threads", cfg.gemm.threads, "Threads for tiled GEMM")->capture_default_str();
    sub.add_flag("--verify-all", cfg.gemm.verify_all, "Verify every size, not only n <= 1024");
    sub.add_option("--provider", cfg.provider, "External GEMM provider: " + join(provider_names()));
    auto* wg = sub.add_option("--gpu-workgroup", raw.workgroup, "GPU GEMM workgroup WxH (default 16x16)");
    sub.add_option("--gpu-tile", cfg.gemm.gpu_tile, "GPU tiled GEMM tile edge")->capture_default_str();
    sub.add_flag("--fixed-grid", cfg.gemm.fixed_grid, "Fixed 8x8 group grid")->excludes(wg);
    sub.add_flag("--power,!--no-power", raw.power, "Sample power around each repetition");
    sub.add_option("--sampler", cfg.sampler.command_template, "Sampler command; <FILE> is the log path")
        ->capture_default_str();
    sub.add_option("--sampler-signal", raw.sampler_signal, "Boundary signal (default " +
                                                               signal_name(default_boundary_signal()) + ")");
    sub.add_option("--sampler-warmup", cfg.sampler.warmup_s, "Seconds to wait after starting the sampler")
        ->capture_default_str();
}

void resolve(RunConfig& cfg, const RawFlags& raw) {
    cfg.stream.n_elements = raw.stream_n ? *raw.stream_n : default_stream_elements(physical_memory_bytes());
    cfg.stream.elem_bytes = raw.fp64 ? 8 : 4;
    cfg.stream.thread_counts =
        raw.threads.empty() ? default_thread_sweep(physical_core_count()) : parse_thread_list(raw.threads);
    if (raw.cache_mb) {
        if (*raw.cache_mb < 0) {
            throw ConfigError("--cache-mb must be >= 0");
        }
        cfg.stream.cache_hint_bytes = static_cast<std::uint64_t>(*raw.cache_mb * 1024.0 * 1024.0);
    } else {
        cfg.stream.cache_hint_bytes = last_level_cache_bytes();
    }
    if (!raw.stream_n) {
        // Large-cache hosts: grow the default until the working set clears
        // 4x the cache, within half of RAM.
        const std::uint64_t ram = physical_memory_bytes();
        auto& n = cfg.stream.n_elements;
        while (3 * n * cfg.stream.elem_bytes <= 4 * cfg.stream.cache_hint_bytes &&
               6 * n * cfg.stream.elem_bytes <= ram / 2) {
            n *= 2;
        }
    }
    if (!raw.sizes.empty()) {
        cfg.gemm.sizes = parse_size_list(raw.sizes);
    }
    if (!raw.impls.empty()) {
        cfg.gemm.implementations = parse_implementation_list(raw.impls);
    }
    if (!raw.workgroup.empty()) {
        cfg.gemm.gpu_workgroup = parse_workgroup(raw.workgroup);
    }
    if (cfg.provider.empty()) {
        cfg.provider = default_provider_name();
    }
    if (!raw.sampler_signal.empty()) {
        cfg.sampler.boundary_signal = parse_signal_name(raw.sampler_signal);
    }
    cfg.sampler.enabled = raw.power;
    if (cfg.device.empty()) {
        cfg.device = cpu_brand().empty() ? "unknown" : cpu_brand();
    }
    if (cfg.memory.empty()) {
        const auto gb = static_cast<double>(physical_memory_bytes()) / (1024.0 * 1024.0 * 1024.0);
        cfg.memory = fixed(gb, 0) + " GB";
    }
}

void ensure_writable(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir) || ::access(dir.c_str(), W_OK) != 0) {
        throw ConfigError("output directory is not writable: " + dir.string());
    }
}

void keep_awake(std::ostream& err) {
    const std::string pid = std::to_string(::getpid());
    const char* argv[] = {"caffeinate", "-dims", "-w", pid.c_str(), nullptr};
    pid_t child = -1;
    if (posix_spawnp(&child, argv[0], nullptr, nullptr, const_cast<char* const*>(argv), environ) != 0) {
        err << "keep-awake: caffeinate not available, continuing\n";
    }
}

std::string chip_for_archive(const RunConfig& cfg) {
    if (cfg.chip_id && !cfg.chip_id->empty()) {
        return *cfg.chip_id;
    }
    return detect_apple_chip().value_or("unknown");
}

// Creates the archive file up front so that concurrent runs never pick the
// same name.
fs::path reserve_archive(const fs::path& dir, std::chrono::system_clock::time_point when) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        fs::path path = unique_archive_path(dir, when);
        std::FILE* f = std::fopen(path.c_str(), "wx");
        if (f != nullptr) {
            std::fclose(f);
            return path;
        }
    }
    throw std::runtime_error("cannot create an archive file in " + dir.string());
}

void print_sample(std::ostream& out, const char* where, const KernelSample& s) {
    out << "  " << where << ' ' << to_string(s.kernel);
    if (s.threads > 0) {
        out << " threads=" << s.threads;
    }
    out << "  best " << fixed(s.best_bandwidth_gbs, 2) << " GB/s\n";
}

bool uses_gpu(const RunConfig& cfg) {
    if (cfg.run_stream) {
        return true;
    }
    return cfg.run_gemm && std::any_of(cfg.gemm.implementations.begin(), cfg.gemm.implementations.end(),
                                       [](const std::string& i) { return is_gpu_implementation(i); });
}

int run_benchmarks(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    ensure_writable(cfg.out_dir);
    auto provider = make_provider(cfg.provider);
    if (cfg.keep_awake) {
        keep_awake(err);
    }

    const auto started = std::chrono::system_clock::now();
    const fs::path archive_path = reserve_archive(cfg.out_dir, started);
    int status = kExitOk;
    try {
        RunArchive archive;
        archive.started_at = iso8601_utc(started);
        archive.machine = {chip_for_archive(cfg), cfg.device, cfg.memory, cfg.cooling, os_description()};

        std::unique_ptr<gpu::GpuContext> gpu;
        std::string gpu_skip = "skipped(no-gpu)";
        if (uses_gpu(cfg)) {
            try {
                gpu = gpu::init_gpu(cfg.gpu_backend);
                archive.gpu_adapter = gpu->info().name + " (" + gpu->info().backend + ")";
                out << "gpu: " << archive.gpu_adapter << '\n';
            } catch (const gpu::GpuUnavailable& e) {
                out << "gpu: unavailable (" << e.what() << ")\n";
            }
        }

        if (cfg.run_stream) {
            out << "stream: n=" << cfg.stream.n_elements << " elem_bytes=" << cfg.stream.elem_bytes << '\n';
            auto cpu = run_stream_suite(cfg.stream, [&](const KernelSample& s) { print_sample(out, "cpu", s); });
            archive.cpu_stream.status = cpu.validation_passed ? "ok" : "validation-failed";
            if (!cpu.validation_passed) {
                err << "cpu stream validation failed: " << cpu.validation_message << '\n';
                status = kExitVerifyFailed;
            }
            archive.cpu_stream.result = std::move(cpu);

            if (gpu) {
                gpu::GpuStreamConfig gcfg;
                gcfg.n_elements = cfg.stream.n_elements;
                gcfg.repetitions = cfg.gpu_stream_reps;
                gcfg.scalar_q = static_cast<float>(cfg.stream.scalar_q);
                auto g = gpu::run_gpu_stream_suite(*gpu, gcfg,
                                                   [&](const KernelSample& s) { print_sample(out, "gpu", s); });
                archive.gpu_stream.status = g.validation_passed ? "ok" : "validation-failed";
                if (!g.validation_passed) {
                    err << "gpu stream validation failed: " << g.validation_message << '\n';
                    status = kExitVerifyFailed;
                }
                archive.gpu_stream.result = std::move(g);
            } else {
                archive.gpu_stream.status = gpu_skip;
            }
        }

        if (cfg.run_gemm) {
            std::optional<PowerSession> session;
            if (cfg.sampler.enabled) {
                SamplerConfig scfg = cfg.sampler;
                scfg.output_path = fs::path(archive_path).replace_extension(".power.txt");
                session.emplace(SamplerHandle::spawn(scfg));
                if (!session->active()) {
                    out << "power: " << session->handle().status() << '\n';
                }
            }
            GemmHooks hooks;
            if (session) {
                hooks.before_repetition = [&](const GemmRepetition& r) {
                    session->begin({std::string(r.implementation), r.n, r.repetition});
                };
                hooks.after_repetition = [&](const GemmRepetition& r, double seconds) {
                    std::optional<double> gflops;
                    if (seconds > 0) {
                        gflops = static_cast<double>(gemm_flops(r.n)) / seconds * 1e-9;
                    }
                    session->end({std::string(r.implementation), r.n, r.repetition}, gflops);
                };
            }
            hooks.on_result = [&](const GemmResult& r) {
                out << "  gemm " << r.implementation << " n=" << r.n << "  " << r.status;
                if (!r.times_s.empty()) {
                    out << "  best " << fixed(r.gflops_best, 2) << " GFLOPS";
                }
                out << '\n';
            };
            archive.gemm = run_gemm_suite(cfg.gemm, {provider.get(), gpu.get()}, hooks);
            for (const auto& r : archive.gemm) {
                if (r.status == kStatusVerifyFailed) {
                    err << "gemm " << r.implementation << " n=" << r.n << " failed verification (max error "
                        << r.max_abs_error << ")\n";
                    status = kExitVerifyFailed;
                }
            }
            if (session) {
                auto power = session->finish();
                archive.energy = std::move(power.records);
                archive.idle_power = power.idle_window;
                archive.power_status = power.status;
            } else {
                archive.power_status = "disabled";
            }
        }

        archive.finished_at = iso8601_utc(std::chrono::system_clock::now());
        persist(archive, archive_path);
    } catch (...) {
        std::error_code ec;
        fs::remove(archive_path, ec);
        throw;
    }
    out << "archive: " << archive_path.string() << '\n';
    return status;
}

PeakChoice parse_peak(const std::string& text) {
    if (text == "max") {
        return PeakChoice::Max;
    }
    if (text == "min") {
        return PeakChoice::Min;
    }
    throw ConfigError("--peak must be 'min' or 'max', got '" + text + "'");
}

fs::path catalog_path(const std::string& text) {
    return text == "default" ? default_catalog_path() : fs::path(text);
}

int run_report(const RawFlags& raw, const RunConfig& cfg, std::ostream& out) {
    if (cfg.dry_run) {
        ordered_json j;
        j["in"] = raw.in;
        j["catalog"] = catalog_path(raw.catalog).string();
        j["peak"] = raw.peak;
        j["out"] = cfg.out_dir.string();
        out << j.dump(2) << '\n';
        return kExitOk;
    }
    const auto choice = parse_peak(raw.peak);
    const Catalog catalog = load_catalog(catalog_path(raw.catalog));
    RunArchive archive = load_archive(raw.in);
    if (cfg.chip_id) {
        archive.machine.chip_id = *cfg.chip_id;
    }
    const EfficiencyReport report = build_efficiency_report(archive, catalog, choice);
    out << render_summary(report);
    ensure_writable(cfg.out_dir);
    for (auto kind : {PlotKind::Bandwidth, PlotKind::Gflops, PlotKind::Power, PlotKind::Efficiency}) {
        const fs::path path = cfg.out_dir / (std::string(to_string(kind)) + ".tsv");
        emit_plot_data(report, kind, path);
        out << "wrote " << path.string() << '\n';
    }
    return kExitOk;
}

int run_catalog(const RawFlags& raw, const RunConfig& cfg, std::ostream& out) {
    const Catalog catalog = load_catalog(catalog_path(raw.catalog));
    out << "catalog: " << catalog.source_path() << " (" << catalog.size() << " chips, valid)\n";
    for (const auto& [id, s] : catalog.entries()) {
        if (cfg.chip_id && *cfg.chip_id != id) {
            continue;
        }
        out << "  " << id << ": " << s.process_nm << " nm, " << s.perf_cores << "P+" << s.eff_cores << "E CPU @ "
            << fixed(s.cpu_clock_ghz_p, 2) << "/" << fixed(s.cpu_clock_ghz_e, 2) << " GHz, GPU " << s.gpu_cores.min
            << "-" << s.gpu_cores.max << " cores @ " << fixed(s.gpu_clock_ghz, 2) << " GHz, FP32 "
            << fixed(s.fp32_tflops.min, 2) << "-" << fixed(s.fp32_tflops.max, 2) << " TFLOPS, "
            << s.mem_technology << " " << fixed(s.mem_bandwidth_gbs, 0) << " GB/s\n";
    }
    if (cfg.chip_id && catalog.find(*cfg.chip_id) == nullptr) {
        throw ConfigError("chip '" + *cfg.chip_id + "' is not in the catalog");
    }
    return kExitOk;
}

} // namespace

gpu::Dim2 parse_workgroup(std::string_view text) {
    const auto x = text.find_first_of("xX");
    auto number = [&](std::string_view part) -> std::uint32_t {
        if (part.empty() || part.size() > 6 || part.find_first_not_of("0123456789") != std::string_view::npos) {
            throw ConfigError("workgroup must look like WxH, got '" + std::string(text) + "'");
        }
        const auto v = static_cast<std::uint32_t>(std::stoul(std::string(part)));
        if (v == 0) {
            throw ConfigError("workgroup dimensions must be positive");
        }
        return v;
    };
    if (x == std::string_view::npos) {
        throw ConfigError("workgroup must look like WxH, got '" + std::string(text) + "'");
    }
    return {number(text.substr(0, x)), number(text.substr(x + 1))};
}

void validate_run_config(const RunConfig& cfg) {
    if (!cfg.run_stream && !cfg.run_gemm) {
        throw ConfigError("no benchmark selected");
    }
    if (cfg.run_stream) {
        validate_config(cfg.stream);
        if (cfg.gpu_stream_reps == 0) {
            throw ConfigError("--gpu-reps must be positive");
        }
    }
    if (cfg.run_gemm) {
        validate_config(cfg.gemm);
        const auto names = provider_names();
        if (std::find(names.begin(), names.end(), cfg.provider) == names.end()) {
            throw ConfigError("unknown provider '" + cfg.provider + "'; valid: " + join(names));
        }
        if (cfg.sampler.warmup_s < 0) {
            throw ConfigError("--sampler-warmup must be >= 0");
        }
    }
    const auto backends = gpu::backend_names();
    if (std::find(backends.begin(), backends.end(), cfg.gpu_backend) == backends.end()) {
        throw ConfigError("unknown GPU backend '" + cfg.gpu_backend + "'; valid: " + join(backends));
    }
}

std::string describe(const RunConfig& cfg) {
    ordered_json j;
    j["benchmarks"] = ordered_json::array();
    if (cfg.run_stream) {
        j["benchmarks"].push_back("stream");
    }
    if (cfg.run_gemm) {
        j["benchmarks"].push_back("gemm");
    }
    j["chip_id"] = cfg.chip_id ? *cfg.chip_id : detect_apple_chip().value_or("unknown");
    j["device"] = cfg.device;
    j["memory"] = cfg.memory;
    j["cooling"] = cfg.cooling;
    j["out_dir"] = cfg.out_dir.string();
    j["keep_awake"] = cfg.keep_awake;
    j["gpu_backend"] = cfg.gpu_backend;
    if (cfg.run_stream) {
        const auto& s = cfg.stream;
        j["stream"] = {{"n_elements", s.n_elements},
                       {"elem_bytes", s.elem_bytes},
                       {"scalar_q", s.scalar_q},
                       {"repetitions", s.repetitions},
                       {"thread_counts", s.thread_counts},
                       {"cache_hint_bytes", s.cache_hint_bytes},
                       {"gpu_repetitions", cfg.gpu_stream_reps}};
    }
    if (cfg.run_gemm) {
        const auto& g = cfg.gemm;
        ordered_json skip = ordered_json::object();
        for (const auto& [impl, n] : g.skip_rules) {
            skip[impl] = n;
        }
        j["gemm"] = {{"sizes", g.sizes},
                     {"repetitions", g.repetitions},
                     {"implementations", g.implementations},
                     {"skip_rules", skip},
                     {"seed", g.seed},
                     {"tile", g.tile},
                     {"threads", g.threads},
                     {"verify_all", g.verify_all},
                     {"verify_max_n", g.verify_max_n},
                     {"provider", cfg.provider},
                     {"gpu_workgroup", std::to_string(g.gpu_workgroup.x) + "x" + std::to_string(g.gpu_workgroup.y)},
                     {"gpu_tile", g.gpu_tile},
                     {"fixed_grid", g.fixed_grid}};
        j["power"] = {{"enabled", cfg.sampler.enabled},
                      {"sampler", cfg.sampler.command_template},
                      {"boundary_signal", signal_name(cfg.sampler.boundary_signal)},
                      {"warmup_s", cfg.sampler.warmup_s},
                      {"min_mark_interval_s", cfg.sampler.min_mark_interval_s}};
    }
    return j.dump(2);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Unified-memory CPU/GPU benchmark suite: STREAM, SGEMM and power", "unibench"};
    app.set_config("--config", "", "Read options from a TOML or INI file");
    app.require_subcommand(1);

    RunConfig cfg;
    RawFlags raw;

    auto* stream = app.add_subcommand("stream", "CPU (and GPU when available) STREAM bandwidth");
    add_common(*stream, cfg);
    add_stream(*stream, cfg, raw);

    auto* gemm = app.add_subcommand("gemm", "SGEMM across implementations and sizes");
    add_common(*gemm, cfg);
    add_gemm(*gemm, cfg, raw);

    auto* all = app.add_subcommand("all", "STREAM followed by SGEMM");
    add_common(*all, cfg);
    add_stream(*all, cfg, raw);
    add_gemm(*all, cfg, raw);

    auto* report = app.add_subcommand("report", "Efficiency report and plot data from an archive");
    report->add_option("--in", raw.in, "Run archive")->required();
    report->add_option("--catalog", raw.catalog, "'default' or a catalog path")->capture_default_str();
    report->add_option("--peak", raw.peak, "Ranged peak used as denominator: max or min")->capture_default_str();
    report->add_option("--out", cfg.out_dir, "Directory for plot data")->capture_default_str();
    report->add_option("--chip", cfg.chip_id, "Override the archive's chip id");
    report->add_flag("--dry-run", cfg.dry_run, "Print the resolved configuration and exit");

    auto* catalog = app.add_subcommand("catalog", "List and validate device specifications");
    catalog->add_option("--catalog", raw.catalog, "'default' or a catalog path")->capture_default_str();
    catalog->add_option("--chip", cfg.chip_id, "Show one chip");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (report->parsed()) {
            return run_report(raw, cfg, out);
        }
        if (catalog->parsed()) {
            return run_catalog(raw, cfg, out);
        }
        cfg.run_stream = stream->parsed() || all->parsed();
        cfg.run_gemm = gemm->parsed() || all->parsed();
        resolve(cfg, raw);
        validate_run_config(cfg);
        if (cfg.dry_run) {
            out << describe(cfg) << '\n';
            return kExitOk;
        }
        return run_benchmarks(cfg, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
}

} // namespace unibench::cli

#pragma once

#include "unibench/archive.hpp"

#include "test_util.hpp"

#include <algorithm>

namespace testutil {

using namespace unibench;

inline std::optional<double> maybe(Gen& gen, double lo, double hi) {
    if (gen.coin()) {
        return gen.real(lo, hi);
    }
    return std::nullopt;
}

inline StreamSection random_stream(Gen& gen, bool gpu) {
    StreamSection s;
    switch (gen.size(0, 2)) {
    case 0:
        s.status = "not-run";
        return s;
    case 1:
        s.status = gpu ? "skipped(no-gpu)" : "validation-failed";
        if (gen.coin()) {
            return s;
        }
        break;
    default:
        s.status = "ok";
    }
    StreamResult r;
    r.n_elements = gen.size(1, std::size_t{1} << 30);
    r.elem_bytes = gpu || gen.coin() ? 4 : 8;
    r.repetitions = gen.size(2, 30);
    r.scalar_q = gen.real(-5, 5);
    r.validation_passed = gen.coin();
    r.validation_message = gen.text(40);
    const std::size_t thread_counts = gpu ? 1 : gen.size(1, 4);
    for (std::size_t t = 0; t < thread_counts; ++t) {
        for (auto kernel : kStreamKernels) {
            KernelSample k;
            k.kernel = kernel;
            k.threads = gpu ? 0 : t + 1;
            k.times_s = gen.positive_times(gen.size(1, 8));
            k.best_time_s = *std::min_element(k.times_s.begin(), k.times_s.end());
            k.best_bandwidth_gbs = gen.real(0.1, 500);
            r.samples.push_back(k);
        }
    }
    s.result = r;
    return s;
}

inline RunArchive random_archive(Gen& gen) {
    RunArchive a;
    a.machine = {"M" + std::to_string(gen.size(1, 9)) + gen.text(6), gen.text(30), gen.text(10), gen.text(12),
                 gen.text(20)};
    if (a.machine.chip_id.empty()) {
        a.machine.chip_id = "M4";
    }
    a.cpu_stream = random_stream(gen, false);
    a.gpu_stream = random_stream(gen, true);
    const std::vector<std::string> impls = {"naive", "tiled", "external", "gpu-naive", "gpu-tiled"};
    for (const auto& impl : impls) {
        if (!gen.coin()) {
            continue;
        }
        for (std::size_t n = 2; n <= 1024; n *= gen.size(2, 8)) {
            GemmResult r;
            r.implementation = impl;
            r.n = n;
            r.status = gen.coin() ? "ok" : "skipped(provider)";
            if (r.status == "ok") {
                r.times_s = gen.positive_times(gen.size(1, 6));
                r.gflops_best = gen.real(0.01, 5000);
                r.verified = gen.coin();
                r.max_abs_error = gen.real(0, 1e-3);
            }
            if (impl.rfind("gpu-", 0) == 0) {
                r.copy_mode = gen.coin() ? "zero-copy" : "staged";
            }
            a.gemm.push_back(r);
        }
    }
    for (std::size_t i = 0, count = gen.size(0, 6); i < count; ++i) {
        EnergyRecord e;
        e.key = {impls[gen.size(0, impls.size() - 1)], gen.size(2, 4096), gen.size(0, 10)};
        e.window = {gen.real(1e-3, 10), gen.real(0, 40), gen.real(0, 40)};
        e.energy_j = gen.real(0, 400);
        e.gflops_per_watt = maybe(gen, 0.1, 500);
        a.energy.push_back(e);
    }
    if (gen.coin()) {
        a.idle_power = PowerWindow{gen.real(0.1, 5), gen.real(0, 5), gen.real(0, 5)};
    }
    a.power_status = gen.coin() ? "ok" : "unavailable: " + gen.text(20);
    a.gpu_adapter = gen.text(20);
    a.started_at = "2026-10-15T09:00:00Z";
    a.finished_at = gen.coin() ? "2026-10-15T09:10:00Z" : "";
    return a;
}

} // namespace testutil

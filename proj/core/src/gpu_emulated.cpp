#include "unibench/gpu_runner.hpp"

#include "unibench/errors.hpp"

#include <cstring>
#include <vector>

namespace unibench::gpu {

namespace {

class EmulatedMemory final : public DeviceMemory {
public:
    explicit EmulatedMemory(std::span<std::byte> host) : view_(host) {}
    explicit EmulatedMemory(std::size_t bytes) : owned_(bytes), view_(owned_.bytes()) {}

    std::size_t size_bytes() const override { return view_.size(); }
    std::span<std::byte> bytes() const { return view_; }
    std::span<float> floats() const {
        return {reinterpret_cast<float*>(view_.data()), view_.size() / sizeof(float)};
    }

private:
    AlignedBuffer owned_;
    std::span<std::byte> view_;
};

const EmulatedMemory& as_emulated(const DeviceMemory& m) {
    const auto* e = dynamic_cast<const EmulatedMemory*>(&m);
    if (e == nullptr) {
        throw DeviceLost("emulated device received foreign device memory");
    }
    return *e;
}

// Invocation-level model of the compute kernels. Each loop nest walks groups
// and local invocations in the order a device would schedule them; barriers
// are modelled as phase boundaries inside a workgroup.
class EmulatedDevice final : public ComputeDevice {
public:
    EmulatedDevice(bool unified, DeviceLimits limits) : unified_(unified), limits_(limits) {}

    AdapterInfo info() const override {
        return {unified_ ? "host emulation (unified)" : "host emulation (discrete)", "emulated", unified_, limits_};
    }

    std::unique_ptr<DeviceMemory> wrap_host(std::span<std::byte> host) override {
        if (!unified_) {
            throw DeviceLost("emulated discrete device cannot wrap host memory");
        }
        return std::make_unique<EmulatedMemory>(host);
    }

    std::unique_ptr<DeviceMemory> allocate(std::size_t bytes) override {
        return std::make_unique<EmulatedMemory>(bytes);
    }

    void upload(DeviceMemory& dst, std::span<const std::byte> src) override {
        auto d = as_emulated(dst).bytes();
        std::memcpy(d.data(), src.data(), std::min(d.size(), src.size()));
    }

    void download(const DeviceMemory& src, std::span<std::byte> dst) override {
        auto s = as_emulated(src).bytes();
        std::memcpy(dst.data(), s.data(), std::min(s.size(), dst.size()));
    }

    void submit_and_wait(std::string_view entry_point, const KernelParams& params,
                         std::span<DeviceMemory* const> bindings, const DispatchPlan& plan) override {
        if (bindings.size() != 3) {
            throw DeviceLost("expected three buffer bindings");
        }
        auto b0 = as_emulated(*bindings[0]).floats();
        auto b1 = as_emulated(*bindings[1]).floats();
        auto b2 = as_emulated(*bindings[2]).floats();
        for (std::size_t k = 0; k < 4; ++k) {
            if (entry_point == kEntryPoints[k]) {
                run_stream(static_cast<StreamKernel>(k), b0, b1, b2, params, plan);
                return;
            }
        }
        if (entry_point == kEntryPoints[4]) {
            run_gemm_naive(b0, b1, b2, params, plan);
        } else if (entry_point == kEntryPoints[5]) {
            run_gemm_tiled(b0, b1, b2, params, plan);
        } else {
            throw DeviceLost("unknown entry point '" + std::string(entry_point) + "'");
        }
    }

private:
    static void run_stream(StreamKernel kernel, std::span<float> a, std::span<float> b, std::span<float> c,
                           const KernelParams& params, const DispatchPlan& plan) {
        const std::size_t n = params.n;
        const std::size_t row_width = static_cast<std::size_t>(plan.group_count.x) * plan.workgroup_size.x;
        const std::size_t rows = static_cast<std::size_t>(plan.group_count.y) * plan.workgroup_size.y;
        for (std::size_t gy = 0; gy < rows; ++gy) {
            const std::size_t begin = gy * row_width;
            if (begin >= n) {
                break;
            }
            // Invocations with a linear id >= n return without writing.
            apply_stream_kernel(kernel, a, b, c, params.q, begin, std::min(n, begin + row_width));
        }
    }

    static void run_gemm_naive(std::span<const float> a, std::span<const float> b, std::span<float> c,
                               const KernelParams& params, const DispatchPlan& plan) {
        const std::size_t n = params.n;
        const std::size_t width = static_cast<std::size_t>(plan.group_count.x) * plan.workgroup_size.x;
        const std::size_t height = static_cast<std::size_t>(plan.group_count.y) * plan.workgroup_size.y;
        for (std::size_t row = 0; row < std::min(height, n); ++row) {
            for (std::size_t col = 0; col < std::min(width, n); ++col) {
                float sum = 0.0f;
                for (std::size_t k = 0; k < n; ++k) {
                    sum += a[row * n + k] * b[k * n + col];
                }
                c[row * n + col] = sum;
            }
        }
    }

    static void run_gemm_tiled(std::span<const float> a, std::span<const float> b, std::span<float> c,
                               const KernelParams& params, const DispatchPlan& plan) {
        const std::size_t n = params.n;
        const std::size_t t = params.tile;
        if (t == 0 || plan.workgroup_size.x != t || plan.workgroup_size.y != t) {
            throw DeviceLost("gemm_tiled: workgroup must be tile x tile");
        }
        std::vector<float> tile_a(t * t);
        std::vector<float> tile_b(t * t);
        std::vector<float> acc(t * t);
        const std::size_t k_tiles = (n + t - 1) / t;
        for (std::size_t gy = 0; gy < plan.group_count.y; ++gy) {
            for (std::size_t gx = 0; gx < plan.group_count.x; ++gx) {
                std::fill(acc.begin(), acc.end(), 0.0f);
                for (std::size_t kt = 0; kt < k_tiles; ++kt) {
                    // Phase 1: each invocation stages one element of each tile.
                    for (std::size_t ly = 0; ly < t; ++ly) {
                        for (std::size_t lx = 0; lx < t; ++lx) {
                            const std::size_t row = gy * t + ly;
                            const std::size_t col = gx * t + lx;
                            const std::size_t ka = kt * t + lx;
                            const std::size_t kb = kt * t + ly;
                            tile_a[ly * t + lx] = (row < n && ka < n) ? a[row * n + ka] : 0.0f;
                            tile_b[ly * t + lx] = (kb < n && col < n) ? b[kb * n + col] : 0.0f;
                        }
                    }
                    // barrier
                    // Phase 2: partial dot products from local memory.
                    for (std::size_t ly = 0; ly < t; ++ly) {
                        for (std::size_t lx = 0; lx < t; ++lx) {
                            float sum = acc[ly * t + lx];
                            for (std::size_t k = 0; k < t; ++k) {
                                sum += tile_a[ly * t + k] * tile_b[k * t + lx];
                            }
                            acc[ly * t + lx] = sum;
                        }
                    }
                    // barrier
                }
                for (std::size_t ly = 0; ly < t; ++ly) {
                    for (std::size_t lx = 0; lx < t; ++lx) {
                        const std::size_t row = gy * t + ly;
                        const std::size_t col = gx * t + lx;
                        if (row < n && col < n) {
                            c[row * n + col] = acc[ly * t + lx];
                        }
                    }
                }
            }
        }
    }

    bool unified_;
    DeviceLimits limits_;
};

} // namespace

std::unique_ptr<ComputeDevice> make_emulated_device(bool unified_memory, DeviceLimits limits) {
    return std::make_unique<EmulatedDevice>(unified_memory, limits);
}

} // namespace unibench::gpu

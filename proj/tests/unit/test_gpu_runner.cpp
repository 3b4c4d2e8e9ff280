#include "unibench/errors.hpp"
#include "unibench/gemm.hpp"
#include "unibench/gemm_suite.hpp"
#include "unibench/gpu_runner.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>

using namespace unibench;
using namespace unibench::gpu;

namespace {

// Delegates to the emulated device; lets tests observe or break dispatches.
class ProbeDevice : public ComputeDevice {
public:
    explicit ProbeDevice(bool unified = true, DeviceLimits limits = {})
        : inner_(make_emulated_device(unified, limits)) {}

    AdapterInfo info() const override { return inner_->info(); }
    std::unique_ptr<DeviceMemory> wrap_host(std::span<std::byte> host) override { return inner_->wrap_host(host); }
    std::unique_ptr<DeviceMemory> allocate(std::size_t bytes) override { return inner_->allocate(bytes); }
    void upload(DeviceMemory& dst, std::span<const std::byte> src) override { inner_->upload(dst, src); }
    void download(const DeviceMemory& src, std::span<std::byte> dst) override { inner_->download(src, dst); }
    void submit_and_wait(std::string_view entry, const KernelParams& params, std::span<DeviceMemory* const> bindings,
                         const DispatchPlan& plan) override {
        last_entry = std::string(entry);
        last_params = params;
        last_plan = plan;
        if (during) {
            during();
        }
        if (lose_device) {
            throw DeviceLost("device removed");
        }
        inner_->submit_and_wait(entry, params, bindings, plan);
    }

    std::string last_entry;
    KernelParams last_params;
    DispatchPlan last_plan;
    std::function<void()> during;
    bool lose_device = false;

private:
    std::unique_ptr<ComputeDevice> inner_;
};

std::unique_ptr<GpuContext> emulated(bool unified = true) {
    return init_gpu(make_emulated_device(unified));
}

std::size_t ulp_distance(float x, float y) {
    const auto ix = std::bit_cast<std::int32_t>(x);
    const auto iy = std::bit_cast<std::int32_t>(y);
    return static_cast<std::size_t>(std::abs(static_cast<long long>(ix) - iy));
}

} // namespace

TEST(GpuInterface, EntryPointNames) {
    EXPECT_EQ(kEntryPoints, (std::array<std::string_view, 6>{"stream_copy", "stream_scale", "stream_add",
                                                              "stream_triad", "gemm_naive", "gemm_tiled"}));
    EXPECT_EQ(stream_entry_point(StreamKernel::Copy), "stream_copy");
    EXPECT_EQ(stream_entry_point(StreamKernel::Scale), "stream_scale");
    EXPECT_EQ(stream_entry_point(StreamKernel::Add), "stream_add");
    EXPECT_EQ(stream_entry_point(StreamKernel::Triad), "stream_triad");
    EXPECT_EQ(gemm_entry_point(GemmVariant::Naive), "gemm_naive");
    EXPECT_EQ(gemm_entry_point(GemmVariant::Tiled), "gemm_tiled");
}

TEST(GpuInterface, ParameterBlockIsByteExact) {
    static_assert(std::endian::native == std::endian::little);
    const KernelParams p{0x01020304u, 3.0f, 16u, 0u};
    unsigned char bytes[16];
    std::memcpy(bytes, &p, sizeof(p));
    const unsigned char expected[16] = {0x04, 0x03, 0x02, 0x01,  // n
                                        0x00, 0x00, 0x40, 0x40,  // q = 3.0f
                                        0x10, 0x00, 0x00, 0x00,  // tile
                                        0x00, 0x00, 0x00, 0x00}; // reserved
    EXPECT_EQ(std::memcmp(bytes, expected, 16), 0);
    EXPECT_EQ(sizeof(KernelParams), 16u);
}

TEST(GpuInit, NoHardwareMeansUnavailable) {
    EXPECT_THROW(init_gpu("none"), GpuUnavailable);
    EXPECT_THROW(init_gpu("not-a-backend"), ConfigError);
    const auto names = backend_names();
    EXPECT_NE(std::find(names.begin(), names.end(), "emulated"), names.end());
    if (names.size() == 3) {
        // auto, emulated, none: no hardware backend compiled in.
        EXPECT_THROW(init_gpu("auto"), GpuUnavailable);
    }
}

TEST(GpuInit, EmulatedContextReportsCapabilities) {
    auto ctx = init_gpu("emulated");
    EXPECT_TRUE(ctx->supports_unified_memory());
    EXPECT_GE(ctx->info().limits.max_workgroup_size.x, 16u);
    EXPECT_EQ(ctx->explicit_copies(), 0u);
}

TEST(GpuInit, RequiresSixteenBySixteenWorkgroups) {
    DeviceLimits small;
    small.max_workgroup_size = {8, 8};
    small.max_invocations_per_workgroup = 64;
    EXPECT_THROW(init_gpu(make_emulated_device(true, small)), GpuUnavailable);
    EXPECT_THROW(init_gpu(std::unique_ptr<ComputeDevice>{}), GpuUnavailable);
}

TEST(GpuInit, OneLiveContextPerProcess) {
    auto first = emulated();
    EXPECT_THROW(emulated(), GpuUnavailable);
    first.reset();
    EXPECT_NO_THROW(emulated());
}

TEST(GpuBuffers, AllocationRoundsAndZeroes) {
    auto ctx = emulated();
    auto buf = alloc_shared(*ctx, 4096);
    EXPECT_EQ(buf.byte_length(), 16384u);
    EXPECT_EQ(alloc_shared(*ctx, 16384).byte_length(), 16384u);
    EXPECT_EQ(alloc_shared(*ctx, 16385).byte_length(), 32768u);
    const auto view = std::as_const(buf).host_view<float>();
    EXPECT_TRUE(std::all_of(view.begin(), view.end(), [](float v) { return v == 0.0f; }));
    EXPECT_EQ(buf.copy_mode(), CopyMode::ZeroCopy);
    EXPECT_THROW(alloc_shared(*ctx, 0), std::invalid_argument);

    AlignedBuffer host(16384);
    EXPECT_THROW(wrap_shared(*ctx, host.bytes().subspan(4)), std::invalid_argument);
    EXPECT_THROW(wrap_shared(*ctx, host.bytes().first(100)), std::invalid_argument);
    EXPECT_NO_THROW(wrap_shared(*ctx, host.bytes()));
}

TEST(GpuStream, HandCases) {
    auto ctx = emulated();
    auto a = alloc_shared(*ctx, 64);
    auto b = alloc_shared(*ctx, 64);
    auto c = alloc_shared(*ctx, 64);
    const float init[4] = {1, 2, 3, 4};
    std::copy(init, init + 4, a.host_view<float>().begin());
    EXPECT_GE(dispatch_stream(*ctx, StreamKernel::Copy, a, b, c, 4, 3.0f), 0.0);
    const auto cv = std::as_const(c).host_view<float>();
    EXPECT_EQ((std::vector<float>(cv.begin(), cv.begin() + 4)), (std::vector<float>{1, 2, 3, 4}));

    std::fill_n(b.host_view<float>().begin(), 4, 3.0f);
    std::fill_n(c.host_view<float>().begin(), 4, 4.0f);
    dispatch_stream(*ctx, StreamKernel::Triad, a, b, c, 4, 3.0f);
    const auto av = std::as_const(a).host_view<float>();
    EXPECT_TRUE(std::all_of(av.begin(), av.begin() + 4, [](float v) { return v == 15.0f; }));
}

TEST(GpuStream, TrailingInvocationsAreMasked) {
    auto ctx = emulated();
    const std::size_t n = 300;
    auto a = alloc_shared(*ctx, 4096);
    auto b = alloc_shared(*ctx, 4096);
    auto c = alloc_shared(*ctx, 4096);
    std::fill(a.host_view<float>().begin(), a.host_view<float>().end(), 7.0f);
    std::fill(c.host_view<float>().begin(), c.host_view<float>().end(), -1.0f);
    dispatch_stream(*ctx, StreamKernel::Copy, a, b, c, n, 3.0f);
    const auto cv = std::as_const(c).host_view<float>();
    for (std::size_t i = 0; i < cv.size(); ++i) {
        ASSERT_EQ(cv[i], i < n ? 7.0f : -1.0f) << i;
    }
}

TEST(GpuStream, MatchesCpuKernelsWithinOneUlp) {
    auto ctx = emulated();
    testutil::Gen gen(41);
    for (std::size_t n : {1u, 255u, 256u, 257u, 4096u, 10000u}) {
        auto ga = alloc_shared(*ctx, n * 4);
        auto gb = alloc_shared(*ctx, n * 4);
        auto gc = alloc_shared(*ctx, n * 4);
        std::vector<float> a(n), b(n), c(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<float>(gen.real(-10, 10));
            b[i] = static_cast<float>(gen.real(-10, 10));
            c[i] = static_cast<float>(gen.real(-10, 10));
        }
        std::copy(a.begin(), a.end(), ga.host_view<float>().begin());
        std::copy(b.begin(), b.end(), gb.host_view<float>().begin());
        std::copy(c.begin(), c.end(), gc.host_view<float>().begin());
        for (auto kernel : kStreamKernels) {
            apply_stream_kernel(kernel, a, b, c, 3.0f, 0, n);
            dispatch_stream(*ctx, kernel, ga, gb, gc, n, 3.0f);
        }
        const auto va = std::as_const(ga).host_view<float>();
        const auto vb = std::as_const(gb).host_view<float>();
        const auto vc = std::as_const(gc).host_view<float>();
        for (std::size_t i = 0; i < n; ++i) {
            ASSERT_LE(ulp_distance(va[i], a[i]), 1u);
            ASSERT_LE(ulp_distance(vb[i], b[i]), 1u);
            ASSERT_LE(ulp_distance(vc[i], c[i]), 1u);
        }
    }
}

TEST(GpuStream, ParamsAndEntryPointsReachTheDevice) {
    auto probe = std::make_unique<ProbeDevice>();
    ProbeDevice* dev = probe.get();
    auto ctx = init_gpu(std::move(probe));
    auto a = alloc_shared(*ctx, 1024);
    auto b = alloc_shared(*ctx, 1024);
    auto c = alloc_shared(*ctx, 1024);
    dispatch_stream(*ctx, StreamKernel::Scale, a, b, c, 200, 2.5f);
    EXPECT_EQ(dev->last_entry, "stream_scale");
    EXPECT_EQ(dev->last_params.n, 200u);
    EXPECT_EQ(dev->last_params.q, 2.5f);
    EXPECT_EQ(dev->last_plan, (DispatchPlan{{256, 1}, {1, 1}}));
    EXPECT_THROW(dispatch_stream(*ctx, StreamKernel::Copy, a, b, c, 10000, 1.0f), ConfigError);
    EXPECT_THROW(dispatch_stream(*ctx, StreamKernel::Copy, a, b, c, 200, 1.0f, DispatchPlan{{64, 1}, {1, 1}}),
                 ConfigError);
}

TEST(GpuStream, HostViewsAreGuardedDuringDispatch) {
    auto probe = std::make_unique<ProbeDevice>();
    ProbeDevice* dev = probe.get();
    auto ctx = init_gpu(std::move(probe));
    auto a = alloc_shared(*ctx, 64);
    auto b = alloc_shared(*ctx, 64);
    auto c = alloc_shared(*ctx, 64);
    bool threw = false;
    dev->during = [&] {
        try {
            (void)c.host_view<float>();
        } catch (const std::logic_error&) {
            threw = true;
        }
    };
    dispatch_stream(*ctx, StreamKernel::Copy, a, b, c, 4, 1.0f);
    EXPECT_TRUE(threw);
    dev->during = nullptr;
    EXPECT_NO_THROW((void)c.host_view<float>());
}

TEST(GpuStream, DeviceLossPropagates) {
    auto probe = std::make_unique<ProbeDevice>();
    probe->lose_device = true;
    auto ctx = init_gpu(std::move(probe));
    auto a = alloc_shared(*ctx, 64);
    auto b = alloc_shared(*ctx, 64);
    auto c = alloc_shared(*ctx, 64);
    EXPECT_THROW(dispatch_stream(*ctx, StreamKernel::Copy, a, b, c, 4, 1.0f), DeviceLost);
    EXPECT_NO_THROW((void)c.host_view<float>());
}

TEST(GpuStream, SuiteValidatesAndReportsBestOfN) {
    auto ctx = emulated();
    GpuStreamConfig cfg;
    cfg.n_elements = 10000;
    cfg.repetitions = 4;
    const auto r = run_gpu_stream_suite(*ctx, cfg);
    EXPECT_TRUE(r.validation_passed) << r.validation_message;
    ASSERT_EQ(r.samples.size(), 4u);
    for (const auto& s : r.samples) {
        EXPECT_EQ(s.threads, 0u);
        ASSERT_EQ(s.times_s.size(), 4u);
        EXPECT_DOUBLE_EQ(s.best_bandwidth_gbs, bytes_moved(s.kernel, cfg.n_elements, 4) / s.best_time_s / 1e9);
    }
    EXPECT_EQ(ctx->explicit_copies(), 0u);
}

TEST(GpuStream, StagedSuiteCopiesButValidates) {
    auto ctx = emulated(false);
    GpuStreamConfig cfg;
    cfg.n_elements = 5000;
    cfg.repetitions = 2;
    const auto r = run_gpu_stream_suite(*ctx, cfg);
    EXPECT_TRUE(r.validation_passed) << r.validation_message;
    EXPECT_GT(ctx->explicit_copies(), 0u);
}

TEST(GpuPlans, DefaultShapes) {
    EXPECT_EQ(default_gemm_plan(256, GemmVariant::Tiled, kDefaultGemmWorkgroup, 16), (DispatchPlan{{16, 16}, {16, 16}}));
    EXPECT_EQ(default_gemm_plan(100, GemmVariant::Naive), (DispatchPlan{{16, 16}, {7, 7}}));
    EXPECT_EQ(default_gemm_plan(100, GemmVariant::Naive, {32, 8}), (DispatchPlan{{32, 8}, {4, 13}}));
    EXPECT_EQ(default_gemm_plan(64, GemmVariant::Tiled, {32, 8}, 8), (DispatchPlan{{8, 8}, {8, 8}}));
    EXPECT_EQ(fixed_grid_plan(64), (DispatchPlan{{8, 8}, {8, 8}}));
    EXPECT_EQ(fixed_grid_plan(100), (DispatchPlan{{13, 13}, {8, 8}}));

    const DeviceLimits limits;
    EXPECT_EQ(default_stream_plan(1000, limits), (DispatchPlan{{256, 1}, {4, 1}}));
    const std::size_t big = std::size_t{1} << 25;
    const auto p = default_stream_plan(big, limits);
    EXPECT_EQ(p.group_count.x, 65535u);
    EXPECT_EQ(p.group_count.y, 3u);
    EXPECT_GE(std::uint64_t{p.group_count.x} * p.group_count.y * 256, big);
}

TEST(GpuPlans, Validation) {
    const DeviceLimits limits;
    EXPECT_NO_THROW(validate_plan({{16, 16}, {2, 2}}, {32, 32}, limits));
    EXPECT_THROW(validate_plan({{16, 16}, {1, 2}}, {32, 32}, limits), ConfigError);
    EXPECT_THROW(validate_plan({{32, 32}, {1, 1}}, {32, 32}, limits), ConfigError);
    EXPECT_THROW(validate_plan({{0, 16}, {4, 4}}, {32, 32}, limits), ConfigError);
    EXPECT_THROW(validate_plan({{256, 1}, {70000, 1}}, {1, 1}, limits), ConfigError);
}

TEST(GpuGemm, HandCase) {
    auto ctx = emulated();
    MatrixF32 a(2), b(2), c(2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 3; a(1, 1) = 4;
    b(0, 0) = 5; b(0, 1) = 6; b(1, 0) = 7; b(1, 1) = 8;
    auto ga = wrap_shared(*ctx, a.buffer().bytes());
    auto gb = wrap_shared(*ctx, b.buffer().bytes());
    auto gc = wrap_shared(*ctx, c.buffer().bytes());
    dispatch_gemm(*ctx, GemmVariant::Naive, ga, gb, gc, 2, default_gemm_plan(2, GemmVariant::Naive));
    EXPECT_EQ(c(0, 0), 19.0f);
    EXPECT_EQ(c(0, 1), 22.0f);
    EXPECT_EQ(c(1, 0), 43.0f);
    EXPECT_EQ(c(1, 1), 50.0f);
    EXPECT_THROW(dispatch_gemm(*ctx, GemmVariant::Naive, ga, gb, gc, 2, {{1, 1}, {1, 1}}), ConfigError);
    EXPECT_THROW(dispatch_gemm(*ctx, GemmVariant::Tiled, ga, gb, gc, 2, {{16, 8}, {1, 1}}), ConfigError);
}

TEST(GpuGemm, BothVariantsPassVerification) {
    auto ctx = emulated();
    for (std::size_t n : {32u, 64u, 100u, 128u, 256u}) {
        const MatrixF32 a = generate_matrix(n, 42);
        const MatrixF32 b = generate_matrix(n, 43);
        const MatrixF32 oracle = gemm_naive(a, b);
        for (auto variant : {GemmVariant::Naive, GemmVariant::Tiled}) {
            auto ga = alloc_shared(*ctx, n * n * 4);
            auto gb = alloc_shared(*ctx, n * n * 4);
            auto gc = alloc_shared(*ctx, n * n * 4);
            std::copy(a.data().begin(), a.data().end(), ga.host_view<float>().begin());
            std::copy(b.data().begin(), b.data().end(), gb.host_view<float>().begin());
            dispatch_gemm(*ctx, variant, ga, gb, gc, n, default_gemm_plan(n, variant));
            MatrixF32 c(n);
            const auto view = std::as_const(gc).host_view<float>();
            std::copy(view.begin(), view.begin() + n * n, c.data().begin());
            const auto v = verify_gemm(c, oracle, a, b);
            EXPECT_TRUE(v.passed) << "n=" << n << " variant=" << gemm_entry_point(variant);
            EXPECT_LE(v.max_abs_error, v.bound / 4);
        }
    }
}

TEST(GpuGemm, SuiteUsesZeroCopyOnUnifiedMemory) {
    auto ctx = emulated();
    GemmConfig cfg;
    cfg.sizes = {32, 64};
    cfg.repetitions = 2;
    cfg.implementations = {"gpu-naive", "gpu-tiled"};
    const auto out = run_gemm_suite(cfg, {nullptr, ctx.get()});
    ASSERT_EQ(out.size(), 4u);
    for (const auto& r : out) {
        EXPECT_EQ(r.status, kStatusOk);
        EXPECT_TRUE(r.verified);
        EXPECT_EQ(r.copy_mode, "zero-copy");
    }
    EXPECT_EQ(ctx->explicit_copies(), 0u);
}

TEST(GpuGemm, SuiteStagedRecordsCopyMode) {
    auto ctx = emulated(false);
    GemmConfig cfg;
    cfg.sizes = {32};
    cfg.repetitions = 1;
    cfg.implementations = {"gpu-tiled"};
    const auto out = run_gemm_suite(cfg, {nullptr, ctx.get()});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].copy_mode, "staged");
    EXPECT_TRUE(out[0].verified);
    EXPECT_GT(ctx->explicit_copies(), 0u);
}

TEST(GpuGemm, FixedGridRejectedBeforeAnyCellWhenTooLarge) {
    auto ctx = emulated();
    GemmConfig cfg;
    cfg.sizes = {64, 256};
    cfg.repetitions = 1;
    cfg.implementations = {"naive", "gpu-naive"};
    cfg.fixed_grid = true;
    std::size_t cells = 0;
    GemmHooks hooks;
    hooks.on_result = [&](const GemmResult&) { ++cells; };
    EXPECT_THROW(run_gemm_suite(cfg, {nullptr, ctx.get()}, hooks), ConfigError);
    EXPECT_EQ(cells, 0u);
    cfg.sizes = {64, 128};
    const auto out = run_gemm_suite(cfg, {nullptr, ctx.get()});
    ASSERT_EQ(out.size(), 4u);
    for (const auto& r : out) {
        EXPECT_TRUE(r.verified) << r.implementation << " " << r.n;
    }
}

TEST(GpuInit, RegisteredBackendsAreTriedByAuto) {
    register_backend("test-absent", []() -> std::unique_ptr<ComputeDevice> { throw GpuUnavailable("no adapter"); });
    try {
        init_gpu("auto");
        FAIL();
    } catch (const GpuUnavailable& e) {
        EXPECT_NE(std::string(e.what()).find("no adapter"), std::string::npos) << e.what();
    }
    register_backend("test-present", [] { return make_emulated_device(true); });
    const auto names = backend_names();
    EXPECT_NE(std::find(names.begin(), names.end(), "test-present"), names.end());
    auto ctx = init_gpu("auto");
    EXPECT_TRUE(ctx->supports_unified_memory());
    ctx.reset();
    EXPECT_NO_THROW(init_gpu("test-present"));
}

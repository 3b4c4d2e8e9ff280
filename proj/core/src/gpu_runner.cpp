#include "unibench/gpu_runner.hpp"

#include "unibench/errors.hpp"
#include "unibench/timing.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>
#include <utility>

namespace unibench::gpu {

namespace {

std::atomic<bool> g_context_live{false};

struct BackendEntry {
    std::string name;
    DeviceFactory factory;
};

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

std::vector<BackendEntry>& registry() {
    static std::vector<BackendEntry> entries;
    return entries;
}

std::uint32_t ceil_div(std::size_t a, std::size_t b) {
    return static_cast<std::uint32_t>((a + b - 1) / b);
}

std::string describe(const DispatchPlan& p) {
    std::ostringstream os;
    os << "workgroup " << p.workgroup_size.x << "x" << p.workgroup_size.y << ", groups " << p.group_count.x << "x"
       << p.group_count.y;
    return os.str();
}

void check_limits(const DispatchPlan& plan, const DeviceLimits& limits) {
    const auto& wg = plan.workgroup_size;
    const auto& gc = plan.group_count;
    if (wg.x == 0 || wg.y == 0 || gc.x == 0 || gc.y == 0) {
        throw ConfigError("dispatch plan has a zero dimension (" + describe(plan) + ")");
    }
    if (wg.x > limits.max_workgroup_size.x || wg.y > limits.max_workgroup_size.y ||
        static_cast<std::uint64_t>(wg.x) * wg.y > limits.max_invocations_per_workgroup) {
        throw ConfigError("dispatch plan exceeds device workgroup limits (" + describe(plan) + ")");
    }
    if (gc.x > limits.max_groups_per_dimension || gc.y > limits.max_groups_per_dimension) {
        throw ConfigError("dispatch plan exceeds device group-count limits (" + describe(plan) + ")");
    }
}

void require_floats(const SharedBuffer& buf, std::size_t count, const char* what) {
    if (buf.byte_length() < count * sizeof(float)) {
        throw ConfigError(std::string("buffer ") + what + " is too small for the dispatch");
    }
}

} // namespace

std::string_view stream_entry_point(StreamKernel kernel) {
    switch (kernel) {
    case StreamKernel::Copy: return kEntryPoints[0];
    case StreamKernel::Scale: return kEntryPoints[1];
    case StreamKernel::Add: return kEntryPoints[2];
    case StreamKernel::Triad: return kEntryPoints[3];
    }
    return {};
}

std::string_view gemm_entry_point(GemmVariant variant) {
    return variant == GemmVariant::Naive ? kEntryPoints[4] : kEntryPoints[5];
}

std::string_view to_string(CopyMode mode) {
    return mode == CopyMode::ZeroCopy ? "zero-copy" : "staged";
}

// --- backends ---------------------------------------------------------------

void register_backend(std::string name, DeviceFactory factory) {
    std::lock_guard lock(registry_mutex());
    registry().push_back({std::move(name), std::move(factory)});
}

std::vector<std::string> backend_names() {
    std::vector<std::string> names = {"auto", "emulated", "none"};
    std::lock_guard lock(registry_mutex());
    for (const auto& e : registry()) {
        names.push_back(e.name);
    }
    return names;
}

GpuContext::GpuContext(std::unique_ptr<ComputeDevice> device) : device_(std::move(device)) {
    if (!device_) {
        throw GpuUnavailable("no compute device");
    }
    if (g_context_live.exchange(true)) {
        throw GpuUnavailable("a GPU context is already live in this process");
    }
    info_ = device_->info();
}

GpuContext::~GpuContext() {
    device_.reset();
    g_context_live.store(false);
}

std::unique_ptr<GpuContext> init_gpu(std::unique_ptr<ComputeDevice> device) {
    if (!device) {
        throw GpuUnavailable("no compute device");
    }
    const AdapterInfo info = device->info();
    const auto& lim = info.limits;
    if (lim.max_workgroup_size.x < 16 || lim.max_workgroup_size.y < 16 || lim.max_invocations_per_workgroup < 256) {
        throw GpuUnavailable("adapter '" + info.name + "' cannot run 16x16 workgroups");
    }
    return std::make_unique<GpuContext>(std::move(device));
}

std::unique_ptr<GpuContext> init_gpu(std::string_view backend) {
    if (backend == "none") {
        throw GpuUnavailable("GPU disabled");
    }
    if (backend == "emulated") {
        return init_gpu(make_emulated_device());
    }
    std::vector<BackendEntry> entries;
    {
        std::lock_guard lock(registry_mutex());
        entries = registry();
    }
    std::string reasons;
    for (const auto& e : entries) {
        if (backend != "auto" && backend != e.name) {
            continue;
        }
        try {
            return init_gpu(e.factory());
        } catch (const GpuUnavailable& ex) {
            reasons += "; " + e.name + ": " + ex.what();
        }
    }
    if (backend != "auto" && std::none_of(entries.begin(), entries.end(), [&](const auto& e) { return e.name == backend; })) {
        std::string valid;
        for (const auto& n : backend_names()) {
            valid += (valid.empty() ? "" : ", ") + n;
        }
        throw ConfigError("unknown GPU backend '" + std::string(backend) + "' (valid: " + valid + ")");
    }
    throw GpuUnavailable("no compute-capable adapter" + reasons);
}

// --- shared buffers ---------------------------------------------------------

SharedBuffer::SharedBuffer(GpuContext& ctx, AlignedBuffer owned, std::span<std::byte> host)
    : ctx_(&ctx), owned_(std::move(owned)), host_(host) {
    if (ctx.supports_unified_memory()) {
        device_ = ctx.device().wrap_host(host_);
        mode_ = CopyMode::ZeroCopy;
    } else {
        device_ = ctx.device().allocate(host_.size());
        mode_ = CopyMode::Staged;
        host_newer_ = true;
    }
}

SharedBuffer::SharedBuffer(SharedBuffer&&) noexcept = default;
SharedBuffer& SharedBuffer::operator=(SharedBuffer&&) noexcept = default;
SharedBuffer::~SharedBuffer() = default;

void SharedBuffer::sync_from_device() const {
    if (mode_ == CopyMode::Staged && device_newer_) {
        ctx_->device().download(*device_, host_);
        ctx_->count_copy();
        device_newer_ = false;
    }
}

std::span<std::byte> SharedBuffer::mutable_host() {
    if (in_flight_) {
        throw std::logic_error("SharedBuffer: host view requested while a dispatch is in flight");
    }
    sync_from_device();
    if (mode_ == CopyMode::Staged) {
        host_newer_ = true;
    }
    return host_;
}

std::span<const std::byte> SharedBuffer::const_host() const {
    if (in_flight_) {
        throw std::logic_error("SharedBuffer: host view requested while a dispatch is in flight");
    }
    sync_from_device();
    return host_;
}

SharedBuffer alloc_shared(GpuContext& ctx, std::size_t bytes) {
    if (bytes == 0) {
        throw std::invalid_argument("alloc_shared: bytes must be > 0");
    }
    AlignedBuffer owned(bytes);
    const auto host = owned.bytes();
    SharedBuffer buf(ctx, std::move(owned), host);
    // Both sides start zeroed.
    buf.host_newer_ = false;
    return buf;
}

SharedBuffer wrap_shared(GpuContext& ctx, std::span<std::byte> host) {
    if (host.empty() || reinterpret_cast<std::uintptr_t>(host.data()) % kPageBytes != 0 ||
        host.size() % kPageBytes != 0) {
        throw std::invalid_argument("wrap_shared: host memory must be page-aligned and a page multiple");
    }
    return SharedBuffer(ctx, AlignedBuffer{}, host);
}

// Marks buffers in flight for one submission and performs staged transfers.
class DispatchScope {
public:
    DispatchScope(GpuContext& ctx, std::initializer_list<SharedBuffer*> buffers) : ctx_(ctx), buffers_(buffers) {
        for (auto* b : buffers_) {
            if (b->ctx_ != &ctx) {
                throw std::logic_error("SharedBuffer belongs to a different GPU context");
            }
            if (b->mode_ == CopyMode::Staged && b->host_newer_) {
                ctx.device().upload(*b->device_, b->host_);
                ctx.count_copy();
                b->host_newer_ = false;
            }
            b->in_flight_ = true;
            bindings_.push_back(b->device_.get());
        }
    }
    ~DispatchScope() {
        for (auto* b : buffers_) {
            b->in_flight_ = false;
            b->device_newer_ = b->mode_ == CopyMode::Staged;
        }
    }
    DispatchScope(const DispatchScope&) = delete;
    DispatchScope& operator=(const DispatchScope&) = delete;

    [[nodiscard]] std::span<DeviceMemory* const> bindings() const { return bindings_; }

private:
    GpuContext& ctx_;
    std::vector<SharedBuffer*> buffers_;
    std::vector<DeviceMemory*> bindings_;
};

// --- plans ------------------------------------------------------------------

void validate_plan(const DispatchPlan& plan, Dim2 domain, const DeviceLimits& limits) {
    check_limits(plan, limits);
    const auto cover_x = static_cast<std::uint64_t>(plan.workgroup_size.x) * plan.group_count.x;
    const auto cover_y = static_cast<std::uint64_t>(plan.workgroup_size.y) * plan.group_count.y;
    if (cover_x < domain.x || cover_y < domain.y) {
        std::ostringstream os;
        os << "dispatch plan (" << describe(plan) << ") does not cover the " << domain.x << "x" << domain.y
           << " domain";
        throw ConfigError(os.str());
    }
}

DispatchPlan default_stream_plan(std::size_t n, const DeviceLimits& limits, std::uint32_t workgroup) {
    if (workgroup == 0) {
        throw ConfigError("stream workgroup size must be > 0");
    }
    const std::size_t groups = std::max<std::size_t>(1, (n + workgroup - 1) / workgroup);
    DispatchPlan plan{{workgroup, 1}, {static_cast<std::uint32_t>(groups), 1}};
    if (groups > limits.max_groups_per_dimension) {
        plan.group_count.x = limits.max_groups_per_dimension;
        plan.group_count.y = ceil_div(groups, limits.max_groups_per_dimension);
    }
    return plan;
}

DispatchPlan default_gemm_plan(std::size_t n, GemmVariant variant, Dim2 workgroup, std::uint32_t tile) {
    const Dim2 wg = variant == GemmVariant::Tiled ? Dim2{tile, tile} : workgroup;
    if (wg.x == 0 || wg.y == 0) {
        throw ConfigError("GEMM workgroup dimensions must be > 0");
    }
    return {wg, {ceil_div(n, wg.x), ceil_div(n, wg.y)}};
}

DispatchPlan fixed_grid_plan(std::size_t n) {
    const std::uint32_t side = ceil_div(n, 8);
    return {{side, side}, {8, 8}};
}

// --- dispatch ---------------------------------------------------------------

double dispatch_stream(GpuContext& ctx, StreamKernel kernel, SharedBuffer& a, SharedBuffer& b, SharedBuffer& c,
                       std::size_t n, float q, std::optional<DispatchPlan> plan) {
    if (n == 0) {
        throw ConfigError("dispatch_stream: n must be > 0");
    }
    require_floats(a, n, "a");
    require_floats(b, n, "b");
    require_floats(c, n, "c");
    const DispatchPlan p = plan.value_or(default_stream_plan(n, ctx.info().limits));
    check_limits(p, ctx.info().limits);
    const std::uint64_t invocations = static_cast<std::uint64_t>(p.workgroup_size.x) * p.group_count.x *
                                      p.workgroup_size.y * p.group_count.y;
    if (invocations < n) {
        throw ConfigError("dispatch plan (" + describe(p) + ") does not cover " + std::to_string(n) + " elements");
    }
    const KernelParams params{static_cast<std::uint32_t>(n), q, 0, 0};
    DispatchScope scope(ctx, {&a, &b, &c});
    Stopwatch sw;
    ctx.device().submit_and_wait(stream_entry_point(kernel), params, scope.bindings(), p);
    return sw.elapsed_s();
}

double dispatch_gemm(GpuContext& ctx, GemmVariant variant, SharedBuffer& a, SharedBuffer& b, SharedBuffer& c,
                     std::size_t n, const DispatchPlan& plan) {
    if (n == 0) {
        throw ConfigError("dispatch_gemm: n must be > 0");
    }
    require_floats(a, n * n, "A");
    require_floats(b, n * n, "B");
    require_floats(c, n * n, "C");
    const auto dim = static_cast<std::uint32_t>(n);
    validate_plan(plan, {dim, dim}, ctx.info().limits);
    std::uint32_t tile = 0;
    if (variant == GemmVariant::Tiled) {
        if (plan.workgroup_size.x != plan.workgroup_size.y) {
            throw ConfigError("tiled GEMM needs a square workgroup (" + describe(plan) + ")");
        }
        tile = plan.workgroup_size.x;
    }
    const KernelParams params{dim, 0.0f, tile, 0};
    DispatchScope scope(ctx, {&a, &b, &c});
    Stopwatch sw;
    ctx.device().submit_and_wait(gemm_entry_point(variant), params, scope.bindings(), plan);
    return sw.elapsed_s();
}

// --- GPU STREAM suite -------------------------------------------------------

StreamResult run_gpu_stream_suite(GpuContext& ctx, const GpuStreamConfig& config, const StreamProgress& progress) {
    if (config.n_elements == 0) {
        throw ConfigError("gpu stream: n_elements must be > 0");
    }
    if (config.repetitions == 0) {
        throw ConfigError("gpu stream: repetitions must be >= 1");
    }
    const std::size_t n = config.n_elements;
    SharedBuffer a = alloc_shared(ctx, n * sizeof(float));
    SharedBuffer b = alloc_shared(ctx, n * sizeof(float));
    SharedBuffer c = alloc_shared(ctx, n * sizeof(float));
    std::ranges::fill(a.host_view<float>().first(n), 1.0f);
    std::ranges::fill(b.host_view<float>().first(n), 2.0f);
    std::ranges::fill(c.host_view<float>().first(n), 0.0f);

    const DispatchPlan plan = default_stream_plan(n, ctx.info().limits, config.workgroup);

    // Untimed warm-up: one full sequence absorbs pipeline creation.
    for (auto k : kStreamKernels) {
        dispatch_stream(ctx, k, a, b, c, n, config.scalar_q, plan);
    }

    std::array<std::vector<double>, 4> times;
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
        for (std::size_t k = 0; k < kStreamKernels.size(); ++k) {
            times[k].push_back(dispatch_stream(ctx, kStreamKernels[k], a, b, c, n, config.scalar_q, plan));
        }
    }

    StreamResult result;
    result.n_elements = n;
    result.elem_bytes = sizeof(float);
    result.repetitions = config.repetitions;
    result.scalar_q = config.scalar_q;
    for (std::size_t k = 0; k < kStreamKernels.size(); ++k) {
        const auto bytes = bytes_moved(kStreamKernels[k], n, sizeof(float));
        result.samples.push_back(summarize_kernel(kStreamKernels[k], 0, bytes, std::move(times[k])));
        if (progress) {
            progress(result.samples.back());
        }
    }
    const auto& ca = a;
    const auto& cb = b;
    const auto& cc = c;
    const StreamValidation v = validate_stream(ca.host_view<float>().first(n), cb.host_view<float>().first(n),
                                               cc.host_view<float>().first(n), config.repetitions + 1,
                                               config.scalar_q);
    result.validation_passed = v.passed;
    result.validation_message = v.passed ? "ok" : v.message;
    return result;
}

} // namespace unibench::gpu

#pragma once

#include "unibench/aligned_buffer.hpp"
#include "unibench/stream.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace unibench::gpu {

// Shader entry points every compute backend must provide.
inline constexpr std::array<std::string_view, 6> kEntryPoints = {
    "stream_copy", "stream_scale", "stream_add", "stream_triad", "gemm_naive", "gemm_tiled"};

std::string_view stream_entry_point(StreamKernel kernel);

enum class GemmVariant { Naive, Tiled };
std::string_view gemm_entry_point(GemmVariant variant);

// Uniform parameter block bound at binding 3 of every entry point. Layout is
// byte-exact: n at offset 0, q at 4, tile at 8, 4 reserved bytes at 12.
struct KernelParams {
    std::uint32_t n = 0;
    float q = 0.0f;
    std::uint32_t tile = 0;
    std::uint32_t reserved = 0;
};
static_assert(sizeof(KernelParams) == 16);
static_assert(offsetof(KernelParams, n) == 0);
static_assert(offsetof(KernelParams, q) == 4);
static_assert(offsetof(KernelParams, tile) == 8);

struct Dim2 {
    std::uint32_t x = 1;
    std::uint32_t y = 1;
    bool operator==(const Dim2&) const = default;
};

struct DispatchPlan {
    Dim2 workgroup_size;
    Dim2 group_count;
    bool operator==(const DispatchPlan&) const = default;
};

struct DeviceLimits {
    Dim2 max_workgroup_size{256, 256};
    std::uint32_t max_invocations_per_workgroup = 256;
    std::uint32_t max_groups_per_dimension = 65535;
};

struct AdapterInfo {
    std::string name;
    std::string backend;
    bool supports_unified_memory = false;
    DeviceLimits limits;
};

// Default tile edge for the tiled GEMM shader.
inline constexpr std::uint32_t kDefaultShaderTile = 16;
inline constexpr Dim2 kDefaultGemmWorkgroup{16, 16};
inline constexpr std::uint32_t kDefaultStreamWorkgroup = 256;

class GpuUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Device failure during a dispatch; the benchmark aborts.
class DeviceLost : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Opaque device-side storage.
class DeviceMemory {
public:
    virtual ~DeviceMemory() = default;
    [[nodiscard]] virtual std::size_t size_bytes() const = 0;
};

// Backend interface. Implementations wrap a real compute API or, for the
// built-in "emulated" backend, execute the kernels on the host.
class ComputeDevice {
public:
    virtual ~ComputeDevice() = default;
    [[nodiscard]] virtual AdapterInfo info() const = 0;
    // Only called when info().supports_unified_memory. `host` is page-aligned
    // and a page multiple.
    virtual std::unique_ptr<DeviceMemory> wrap_host(std::span<std::byte> host) = 0;
    virtual std::unique_ptr<DeviceMemory> allocate(std::size_t bytes) = 0;
    virtual void upload(DeviceMemory& dst, std::span<const std::byte> src) = 0;
    virtual void download(const DeviceMemory& src, std::span<std::byte> dst) = 0;
    // Bindings 0..2 are the kernel's buffers (a, b, c or A, B, C). Blocks
    // until the dispatch completes.
    virtual void submit_and_wait(std::string_view entry_point, const KernelParams& params,
                                 std::span<DeviceMemory* const> bindings, const DispatchPlan& plan) = 0;
};

// Host-side emulation of the compute kernels, executed workgroup by
// workgroup with local-memory staging for the tiled GEMM.
std::unique_ptr<ComputeDevice> make_emulated_device(bool unified_memory = true, DeviceLimits limits = {});

using DeviceFactory = std::function<std::unique_ptr<ComputeDevice>()>;

// Registers a hardware backend tried by init_gpu("auto") in registration
// order. A factory throws GpuUnavailable when its API finds no adapter.
void register_backend(std::string name, DeviceFactory factory);

// "auto", "emulated", "none" and every registered hardware backend.
std::vector<std::string> backend_names();

class SharedBuffer;

// One per process. Released on destruction.
class GpuContext {
public:
    explicit GpuContext(std::unique_ptr<ComputeDevice> device);
    ~GpuContext();
    GpuContext(const GpuContext&) = delete;
    GpuContext& operator=(const GpuContext&) = delete;

    [[nodiscard]] const AdapterInfo& info() const noexcept { return info_; }
    [[nodiscard]] bool supports_unified_memory() const noexcept { return info_.supports_unified_memory; }
    [[nodiscard]] ComputeDevice& device() noexcept { return *device_; }

    // Host<->device transfers performed on behalf of staged buffers.
    [[nodiscard]] std::size_t explicit_copies() const noexcept { return copies_; }
    void count_copy() noexcept { ++copies_; }

private:
    std::unique_ptr<ComputeDevice> device_;
    AdapterInfo info_;
    std::size_t copies_ = 0;
};

// Throws GpuUnavailable when no adapter exists (or backend == "none"), and
// when the adapter cannot run 16x16 workgroups. Throws GpuUnavailable too if a
// context is already live.
std::unique_ptr<GpuContext> init_gpu(std::string_view backend = "auto");
std::unique_ptr<GpuContext> init_gpu(std::unique_ptr<ComputeDevice> device);

enum class CopyMode { ZeroCopy, Staged };
std::string_view to_string(CopyMode mode);

// Page-multiple buffer visible to both host and device. In ZeroCopy mode the
// device reads the host allocation directly; in Staged mode the runner moves
// data around each dispatch that uses the buffer.
class SharedBuffer {
public:
    SharedBuffer(SharedBuffer&&) noexcept;
    SharedBuffer& operator=(SharedBuffer&&) noexcept;
    ~SharedBuffer();

    [[nodiscard]] std::size_t byte_length() const noexcept { return host_.size(); }
    [[nodiscard]] CopyMode copy_mode() const noexcept { return mode_; }

    // Throws std::logic_error while a dispatch using the buffer is in flight.
    template <typename T>
    std::span<T> host_view() {
        auto bytes = mutable_host();
        return {reinterpret_cast<T*>(bytes.data()), bytes.size() / sizeof(T)};
    }
    template <typename T>
    std::span<const T> host_view() const {
        auto bytes = const_host();
        return {reinterpret_cast<const T*>(bytes.data()), bytes.size() / sizeof(T)};
    }

private:
    friend SharedBuffer alloc_shared(GpuContext& ctx, std::size_t bytes);
    friend SharedBuffer wrap_shared(GpuContext& ctx, std::span<std::byte> host);
    friend class DispatchScope;

    SharedBuffer(GpuContext& ctx, AlignedBuffer owned, std::span<std::byte> host);

    std::span<std::byte> mutable_host();
    std::span<const std::byte> const_host() const;
    void sync_from_device() const;

    GpuContext* ctx_ = nullptr;
    AlignedBuffer owned_;
    std::span<std::byte> host_;
    std::unique_ptr<DeviceMemory> device_;
    CopyMode mode_ = CopyMode::ZeroCopy;
    mutable bool device_newer_ = false;
    bool host_newer_ = false;
    bool in_flight_ = false;
};

// Rounds up to a page multiple and zero-fills. Throws std::invalid_argument
// for bytes == 0.
SharedBuffer alloc_shared(GpuContext& ctx, std::size_t bytes);
// Wraps an existing page-aligned host allocation (no copy when the device has
// unified memory). Throws std::invalid_argument on misalignment.
SharedBuffer wrap_shared(GpuContext& ctx, std::span<std::byte> host);

// Throws ConfigError when the plan does not cover `domain` or exceeds limits.
void validate_plan(const DispatchPlan& plan, Dim2 domain, const DeviceLimits& limits);

// 1-D element grid; the linear index of an invocation is
//   global.y * (group_count.x * workgroup_size.x) + global.x.
DispatchPlan default_stream_plan(std::size_t n, const DeviceLimits& limits,
                                 std::uint32_t workgroup = kDefaultStreamWorkgroup);

// Naive: `workgroup` threads per group, one output each. Tiled: workgroup is
// tile x tile. Group count is ceil(n / workgroup) in each dimension.
DispatchPlan default_gemm_plan(std::size_t n, GemmVariant variant, Dim2 workgroup = kDefaultGemmWorkgroup,
                               std::uint32_t tile = kDefaultShaderTile);

// Compatibility plan: a fixed 8 x 8 group count with workgroups of
// ceil(n / 8) on each side.
DispatchPlan fixed_grid_plan(std::size_t n);

// Wall time (s) from submission to completion. Semantics match the CPU
// kernels. Buffers must hold at least n floats.
double dispatch_stream(GpuContext& ctx, StreamKernel kernel, SharedBuffer& a, SharedBuffer& b, SharedBuffer& c,
                       std::size_t n, float q, std::optional<DispatchPlan> plan = std::nullopt);

// Wall time (s) from submission to completion. Buffers hold n x n row-major
// floats. For the tiled variant the workgroup must be square and its edge is
// the tile size.
double dispatch_gemm(GpuContext& ctx, GemmVariant variant, SharedBuffer& a, SharedBuffer& b, SharedBuffer& c,
                     std::size_t n, const DispatchPlan& plan);

struct GpuStreamConfig {
    std::size_t n_elements = std::size_t{1} << 23;
    // Timed repetitions; one untimed warm-up sequence runs first.
    std::size_t repetitions = 20;
    float scalar_q = 3.0f;
    std::uint32_t workgroup = kDefaultStreamWorkgroup;
};

// FP32 GPU STREAM. Samples carry threads == 0. Validation uses the same
// scalar recurrence as the CPU suite.
StreamResult run_gpu_stream_suite(GpuContext& ctx, const GpuStreamConfig& config,
                                  const StreamProgress& progress = {});

} // namespace unibench::gpu

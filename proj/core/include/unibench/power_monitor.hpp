#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <sys/types.h>

namespace unibench {

// <FILE> is replaced by SamplerConfig::output_path.
inline constexpr std::string_view kDefaultSamplerTemplate =
    "powermetrics -i 0 -a 0 -s cpu_power,gpu_power -o <FILE>";

// SIGINFO where the platform has it, else SIGUSR1.
int default_boundary_signal();
std::string signal_name(int signo);
// Accepts "INFO", "SIGINFO", "USR1", "SIGUSR2", ... Throws ConfigError.
int parse_signal_name(std::string_view name);

struct SamplerConfig {
    std::string command_template{kDefaultSamplerTemplate};
    double warmup_s = 2.0;
    std::filesystem::path output_path;
    bool enabled = true;
    int boundary_signal = default_boundary_signal();
    // Marks closer together than this are spaced out so the sampler sees
    // each boundary signal separately.
    double min_mark_interval_s = 0.01;
};

// Splits the template on whitespace and substitutes <FILE>. Throws
// ConfigError on an empty template.
std::vector<std::string> expand_sampler_command(std::string_view command_template,
                                                const std::filesystem::path& output_path);

// Average power over one sampler window.
struct PowerWindow {
    double elapsed_s = 0.0;
    double cpu_w = 0.0;
    double gpu_w = 0.0;

    [[nodiscard]] double total_w() const noexcept { return cpu_w + gpu_w; }
    bool operator==(const PowerWindow&) const = default;
};

class PowerLogError : public std::runtime_error {
public:
    PowerLogError(std::size_t window_index, const std::string& what)
        : std::runtime_error(what), window_index_(window_index) {}
    [[nodiscard]] std::size_t window_index() const noexcept { return window_index_; }

private:
    std::size_t window_index_;
};

// Extracts windows from sampler text output. A window starts at a line
// containing "(<ms>ms elapsed)"; within it the first "CPU Power: <v> mW" and
// the first "GPU Power: <v> mW" lines are used. Other lines are ignored.
// Throws PowerLogError when a window lacks either power line.
std::vector<PowerWindow> parse_power_log(std::string_view text);

// Minimal text in the format parse_power_log reads.
std::string render_power_log(std::span<const PowerWindow> windows);

// (cpu_w + gpu_w) * elapsed_s.
double energy_of(const PowerWindow& window);

// Time-weighted merge of back-to-back windows. Throws std::invalid_argument on
// an empty span.
PowerWindow merge_windows(std::span<const PowerWindow> windows);

// gflops / watts. Throws DomainError when watts <= 0.
double gflops_per_watt(double gflops, double watts);

class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Child sampler process driven by boundary signals. A handle that could not
// start is "disabled": marks are no-ops and status() explains why.
class SamplerHandle {
public:
    // Never throws for a missing or failing sampler; returns a disabled handle.
    static SamplerHandle spawn(const SamplerConfig& config);
    static SamplerHandle disabled(std::string reason);

    SamplerHandle(SamplerHandle&& other) noexcept;
    SamplerHandle& operator=(SamplerHandle&& other) noexcept;
    SamplerHandle(const SamplerHandle&) = delete;
    SamplerHandle& operator=(const SamplerHandle&) = delete;
    ~SamplerHandle();

    [[nodiscard]] bool active() const noexcept { return pid_ > 0; }
    [[nodiscard]] pid_t pid() const noexcept { return pid_; }
    [[nodiscard]] const std::string& status() const noexcept { return status_; }
    [[nodiscard]] std::size_t marks_sent() const noexcept { return marks_; }

    // Sends the boundary signal. Throws SamplerError (and disables the
    // handle) when the child has exited.
    void mark();

    // Terminates the child and returns its output file contents ("" when
    // disabled or missing).
    std::string stop();

private:
    SamplerHandle() = default;
    void reap();

    pid_t pid_ = -1;
    std::string status_ = "disabled";
    SamplerConfig config_;
    std::size_t marks_ = 0;
    double last_mark_ = 0.0;
};

struct BenchmarkKey {
    std::string implementation;
    std::size_t n = 0;
    std::size_t repetition = 0;
    bool operator==(const BenchmarkKey&) const = default;
};

struct EnergyRecord {
    BenchmarkKey key;
    PowerWindow window;
    double energy_j = 0.0;
    std::optional<double> gflops_per_watt;
    bool operator==(const EnergyRecord&) const = default;
};

// Builds a record; gflops_per_watt is absent when gflops or power is
// unavailable or zero.
EnergyRecord make_energy_record(BenchmarkKey key, const PowerWindow& window, std::optional<double> gflops);

struct PowerSessionResult {
    std::vector<EnergyRecord> records;
    // Window from sampler start to the first boundary; context only.
    std::optional<PowerWindow> idle_window;
    // "ok" or "unavailable: <reason>".
    std::string status;
};

// Brackets benchmark runs with sampler boundaries. Window 0 runs from start
// to the first mark; a begin()/end() pair makes the window ending at end()
// belong to that benchmark.
class PowerSession {
public:
    explicit PowerSession(SamplerHandle handle);

    [[nodiscard]] bool active() const noexcept { return handle_.active(); }
    [[nodiscard]] const SamplerHandle& handle() const noexcept { return handle_; }

    void begin(const BenchmarkKey& key);
    void end(const BenchmarkKey& key, std::optional<double> gflops);

    // Stops the sampler, parses its log and joins windows with benchmarks.
    PowerSessionResult finish();

private:
    struct Pending {
        BenchmarkKey key;
        std::size_t window_index;
        std::optional<double> gflops;
    };

    SamplerHandle handle_;
    std::vector<Pending> labelled_;
    std::string failure_;
};

} // namespace unibench

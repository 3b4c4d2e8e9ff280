#include "unibench/power_monitor.hpp"

#include "unibench/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace unibench {

namespace {

double now_s() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void sleep_s(double seconds) {
    if (seconds > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr == s.data()) {
        return std::nullopt;
    }
    return v;
}

// "CPU Power: 1250 mW" -> watts. Accepts mW and W units.
std::optional<double> parse_power_value(std::string_view rest) {
    rest = trim(rest);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (ec != std::errc() || ptr == rest.data()) {
        return std::nullopt;
    }
    const std::string_view unit = trim(rest.substr(static_cast<std::size_t>(ptr - rest.data())));
    if (unit == "mW") {
        return v / 1000.0;
    }
    if (unit == "W") {
        return v;
    }
    return std::nullopt;
}

struct SignalEntry {
    const char* name;
    int signo;
};

constexpr SignalEntry kSignals[] = {
#if defined(SIGINFO)
    {"INFO", SIGINFO},
#endif
    {"USR1", SIGUSR1}, {"USR2", SIGUSR2}, {"HUP", SIGHUP}, {"INT", SIGINT}, {"TERM", SIGTERM},
};

} // namespace

int default_boundary_signal() {
#if defined(SIGINFO)
    return SIGINFO;
#else
    return SIGUSR1;
#endif
}

std::string signal_name(int signo) {
    for (const auto& s : kSignals) {
        if (s.signo == signo) {
            return std::string("SIG") + s.name;
        }
    }
    return "signal " + std::to_string(signo);
}

int parse_signal_name(std::string_view name) {
    if (name.rfind("SIG", 0) == 0) {
        name.remove_prefix(3);
    }
    for (const auto& s : kSignals) {
        if (name == s.name) {
            return s.signo;
        }
    }
    throw ConfigError("unsupported boundary signal '" + std::string(name) + "'");
}

std::vector<std::string> expand_sampler_command(std::string_view command_template,
                                                const std::filesystem::path& output_path) {
    std::vector<std::string> argv;
    std::istringstream in{std::string(command_template)};
    std::string token;
    while (in >> token) {
        for (std::size_t pos = token.find("<FILE>"); pos != std::string::npos; pos = token.find("<FILE>", pos)) {
            token.replace(pos, 6, output_path.string());
            pos += output_path.string().size();
        }
        argv.push_back(token);
    }
    if (argv.empty()) {
        throw ConfigError("sampler command template is empty");
    }
    return argv;
}

// --- log parsing ------------------------------------------------------------

std::vector<PowerWindow> parse_power_log(std::string_view text) {
    struct Partial {
        double elapsed_s = 0.0;
        std::optional<double> cpu_w;
        std::optional<double> gpu_w;
    };
    std::vector<Partial> windows;

    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        const std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;

        if (const auto marker = line.find("ms elapsed)"); marker != std::string_view::npos) {
            const auto open = line.rfind('(', marker);
            const auto ms = open == std::string_view::npos ? std::nullopt
                                                           : parse_number(line.substr(open + 1, marker - open - 1));
            if (!ms || *ms < 0.0) {
                throw PowerLogError(windows.size(), "window " + std::to_string(windows.size()) +
                                                        ": unreadable elapsed time in '" + std::string(line) + "'");
            }
            windows.push_back({*ms / 1000.0, std::nullopt, std::nullopt});
            continue;
        }
        if (windows.empty()) {
            continue;
        }
        auto& w = windows.back();
        if (line.rfind("CPU Power:", 0) == 0) {
            if (!w.cpu_w) {
                w.cpu_w = parse_power_value(line.substr(10));
            }
        } else if (line.rfind("GPU Power:", 0) == 0) {
            if (!w.gpu_w) {
                w.gpu_w = parse_power_value(line.substr(10));
            }
        }
    }

    std::vector<PowerWindow> out;
    out.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        if (!w.cpu_w || !w.gpu_w) {
            throw PowerLogError(i, "window " + std::to_string(i) + ": missing " + (!w.cpu_w ? "CPU" : "GPU") +
                                       " power line");
        }
        out.push_back({w.elapsed_s, *w.cpu_w, *w.gpu_w});
    }
    return out;
}

std::string render_power_log(std::span<const PowerWindow> windows) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& w : windows) {
        os << "*** Sampled system activity (" << w.elapsed_s * 1000.0 << "ms elapsed) ***\n\n"
           << "**** Processor usage ****\n\n"
           << "CPU Power: " << w.cpu_w * 1000.0 << " mW\n"
           << "GPU Power: " << w.gpu_w * 1000.0 << " mW\n\n";
    }
    return os.str();
}

double energy_of(const PowerWindow& window) {
    return window.total_w() * window.elapsed_s;
}

PowerWindow merge_windows(std::span<const PowerWindow> windows) {
    if (windows.empty()) {
        throw std::invalid_argument("merge_windows: no windows");
    }
    PowerWindow merged;
    double cpu_j = 0.0;
    double gpu_j = 0.0;
    for (const auto& w : windows) {
        merged.elapsed_s += w.elapsed_s;
        cpu_j += w.cpu_w * w.elapsed_s;
        gpu_j += w.gpu_w * w.elapsed_s;
    }
    if (merged.elapsed_s > 0.0) {
        merged.cpu_w = cpu_j / merged.elapsed_s;
        merged.gpu_w = gpu_j / merged.elapsed_s;
    }
    return merged;
}

double gflops_per_watt(double gflops, double watts) {
    if (!(watts > 0.0)) {
        throw DomainError("gflops_per_watt: watts must be > 0");
    }
    return gflops / watts;
}

// --- sampler process --------------------------------------------------------

SamplerHandle SamplerHandle::disabled(std::string reason) {
    SamplerHandle h;
    h.status_ = std::move(reason);
    return h;
}

SamplerHandle SamplerHandle::spawn(const SamplerConfig& config) {
    if (!config.enabled) {
        return disabled("unavailable: power monitoring disabled");
    }
    std::vector<std::string> args;
    try {
        args = expand_sampler_command(config.command_template, config.output_path);
    } catch (const ConfigError& e) {
        return disabled(std::string("unavailable: ") + e.what());
    }
    std::vector<char*> argv;
    for (auto& a : args) {
        argv.push_back(a.data());
    }
    argv.push_back(nullptr);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
    pid_t pid = -1;
    const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
        return disabled("unavailable: cannot start '" + args[0] + "': " + std::strerror(rc));
    }

    SamplerHandle h;
    h.pid_ = pid;
    h.config_ = config;
    h.status_ = "running";

    sleep_s(config.warmup_s);

    int wstatus = 0;
    if (::waitpid(pid, &wstatus, WNOHANG) == pid) {
        h.pid_ = -1;
        std::string why = WIFEXITED(wstatus) ? "exited with status " + std::to_string(WEXITSTATUS(wstatus))
                                             : "terminated by " + signal_name(WTERMSIG(wstatus));
        h.status_ = "unavailable: sampler '" + args[0] + "' " + why + " (insufficient privileges?)";
        return h;
    }
    h.last_mark_ = now_s();
    return h;
}

SamplerHandle::SamplerHandle(SamplerHandle&& other) noexcept
    : pid_(std::exchange(other.pid_, -1)),
      status_(std::move(other.status_)),
      config_(std::move(other.config_)),
      marks_(other.marks_),
      last_mark_(other.last_mark_) {}

SamplerHandle& SamplerHandle::operator=(SamplerHandle&& other) noexcept {
    if (this != &other) {
        reap();
        pid_ = std::exchange(other.pid_, -1);
        status_ = std::move(other.status_);
        config_ = std::move(other.config_);
        marks_ = other.marks_;
        last_mark_ = other.last_mark_;
    }
    return *this;
}

SamplerHandle::~SamplerHandle() {
    reap();
}

void SamplerHandle::mark() {
    if (!active()) {
        return;
    }
    const double wait = config_.min_mark_interval_s - (now_s() - last_mark_);
    sleep_s(wait);

    int wstatus = 0;
    if (::waitpid(pid_, &wstatus, WNOHANG) == pid_ || ::kill(pid_, config_.boundary_signal) != 0) {
        pid_ = -1;
        status_ = "unavailable: sampler process exited during the run";
        throw SamplerError(status_);
    }
    ++marks_;
    last_mark_ = now_s();
}

void SamplerHandle::reap() {
    if (pid_ <= 0) {
        return;
    }
    ::kill(pid_, SIGTERM);
    const double deadline = now_s() + 5.0;
    int wstatus = 0;
    while (::waitpid(pid_, &wstatus, WNOHANG) == 0) {
        if (now_s() > deadline) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &wstatus, 0);
            break;
        }
        sleep_s(0.002);
    }
    pid_ = -1;
}

std::string SamplerHandle::stop() {
    if (active()) {
        // Let the sampler finish writing the last window before terminating.
        sleep_s(std::max(config_.min_mark_interval_s, 0.05));
        reap();
        status_ = "stopped";
    }
    if (config_.output_path.empty()) {
        return {};
    }
    std::ifstream in(config_.output_path, std::ios::binary);
    if (!in) {
        return {};
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --- session ----------------------------------------------------------------

EnergyRecord make_energy_record(BenchmarkKey key, const PowerWindow& window, std::optional<double> gflops) {
    EnergyRecord r;
    r.key = std::move(key);
    r.window = window;
    r.energy_j = energy_of(window);
    if (gflops && window.total_w() > 0.0) {
        r.gflops_per_watt = gflops_per_watt(*gflops, window.total_w());
    }
    return r;
}

PowerSession::PowerSession(SamplerHandle handle) : handle_(std::move(handle)) {
    if (!handle_.active()) {
        failure_ = handle_.status();
    }
}

void PowerSession::begin(const BenchmarkKey&) {
    try {
        handle_.mark();
    } catch (const SamplerError& e) {
        failure_ = e.what();
    }
}

void PowerSession::end(const BenchmarkKey& key, std::optional<double> gflops) {
    if (!handle_.active()) {
        return;
    }
    try {
        handle_.mark();
        labelled_.push_back({key, handle_.marks_sent() - 1, gflops});
    } catch (const SamplerError& e) {
        failure_ = e.what();
    }
}

PowerSessionResult PowerSession::finish() {
    PowerSessionResult result;
    const bool started = handle_.active() || !failure_.empty();
    const std::string reason = handle_.status();
    const std::string text = handle_.stop();
    if (!started) {
        result.status = reason.rfind("unavailable", 0) == 0 ? reason : "unavailable: " + reason;
        return result;
    }
    if (!failure_.empty()) {
        result.status = failure_.rfind("unavailable", 0) == 0 ? failure_ : "unavailable: " + failure_;
        return result;
    }
    std::vector<PowerWindow> windows;
    try {
        windows = parse_power_log(text);
    } catch (const PowerLogError& e) {
        result.status = std::string("unavailable: ") + e.what();
        return result;
    }
    if (!windows.empty()) {
        result.idle_window = windows.front();
    }
    std::size_t joined = 0;
    for (const auto& p : labelled_) {
        if (p.window_index < windows.size()) {
            result.records.push_back(make_energy_record(p.key, windows[p.window_index], p.gflops));
            ++joined;
        }
    }
    result.status = joined == labelled_.size()
                        ? "ok"
                        : "incomplete: sampler reported " + std::to_string(windows.size()) + " windows for " +
                              std::to_string(handle_.marks_sent()) + " boundaries";
    return result;
}

} // namespace unibench

#include "unibench/system_info.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>
#include <utility>

#include <sys/utsname.h>
#include <unistd.h>

#if defined(__APPLE__)
#include <sys/sysctl.h>
#include <sys/types.h>
#endif

namespace unibench {

namespace {

#if defined(__APPLE__)
template <typename T>
std::optional<T> sysctl_value(const char* name) {
    T value{};
    std::size_t len = sizeof(value);
    if (sysctlbyname(name, &value, &len, nullptr, 0) != 0) {
        return std::nullopt;
    }
    return value;
}

std::string sysctl_string(const char* name) {
    std::size_t len = 0;
    if (sysctlbyname(name, nullptr, &len, nullptr, 0) != 0 || len == 0) {
        return {};
    }
    std::string out(len, '\0');
    if (sysctlbyname(name, out.data(), &len, nullptr, 0) != 0) {
        return {};
    }
    while (!out.empty() && out.back() == '\0') {
        out.pop_back();
    }
    return out;
}
#endif

std::size_t logical_cores() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

} // namespace

std::size_t physical_core_count() {
#if defined(__APPLE__)
    if (auto v = sysctl_value<int>("hw.physicalcpu"); v && *v > 0) {
        return static_cast<std::size_t>(*v);
    }
#elif defined(__linux__)
    namespace fs = std::filesystem;
    std::set<std::pair<std::string, std::string>> cores;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator("/sys/devices/system/cpu", ec)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("cpu", 0) != 0 || name.size() < 4 ||
            name.find_first_not_of("0123456789", 3) != std::string::npos) {
            continue;
        }
        std::ifstream pkg(entry.path() / "topology/physical_package_id");
        std::ifstream core(entry.path() / "topology/core_id");
        std::string p, c;
        if (pkg >> p && core >> c) {
            cores.emplace(p, c);
        }
    }
    if (!cores.empty()) {
        return std::min(cores.size(), logical_cores());
    }
#endif
    return logical_cores();
}

std::uint64_t physical_memory_bytes() {
#if defined(__APPLE__)
    if (auto v = sysctl_value<std::uint64_t>("hw.memsize")) {
        return *v;
    }
#endif
    const long pages = ::sysconf(_SC_PHYS_PAGES);
    const long page = ::sysconf(_SC_PAGESIZE);
    if (pages > 0 && page > 0) {
        return static_cast<std::uint64_t>(pages) * static_cast<std::uint64_t>(page);
    }
    return 0;
}

std::uint64_t last_level_cache_bytes() {
#if defined(__APPLE__)
    for (const char* key : {"hw.l3cachesize", "hw.l2cachesize"}) {
        if (auto v = sysctl_value<std::uint64_t>(key); v && *v > 0) {
            return *v;
        }
    }
#elif defined(_SC_LEVEL3_CACHE_SIZE)
    for (int key : {_SC_LEVEL3_CACHE_SIZE, _SC_LEVEL2_CACHE_SIZE}) {
        if (const long v = ::sysconf(key); v > 0) {
            return static_cast<std::uint64_t>(v);
        }
    }
#endif
    return 0;
}

std::string os_description() {
    utsname u{};
    if (::uname(&u) != 0) {
        return "unknown";
    }
    return std::string(u.sysname) + " " + u.release + " " + u.machine;
}

std::string cpu_brand() {
#if defined(__APPLE__)
    return sysctl_string("machdep.cpu.brand_string");
#elif defined(__linux__)
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            if (auto pos = line.find(':'); pos != std::string::npos) {
                return line.substr(line.find_first_not_of(' ', pos + 1));
            }
        }
    }
    return {};
#else
    return {};
#endif
}

std::optional<std::string> detect_apple_chip() {
    const std::string brand = cpu_brand();
    if (brand.rfind("Apple M", 0) != 0 || brand.size() < 8) {
        return std::nullopt;
    }
    // "Apple M4 Pro" -> "M4"
    std::string chip = "M";
    for (std::size_t i = 7; i < brand.size() && std::isdigit(static_cast<unsigned char>(brand[i])); ++i) {
        chip += brand[i];
    }
    if (chip.size() == 1) {
        return std::nullopt;
    }
    return chip;
}

} // namespace unibench

#pragma once

#include "unibench/gemm_suite.hpp"
#include "unibench/power_monitor.hpp"
#include "unibench/stream.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace unibench {

inline constexpr int kArchiveSchemaVersion = 1;

// Free-text description of the machine under test; cooling cannot be
// detected and is user supplied.
struct MachineDescriptor {
    std::string chip_id;
    std::string device;
    std::string memory;
    std::string cooling;
    std::string os;
    bool operator==(const MachineDescriptor&) const = default;
};

// status is "ok", "not-run" or a skip reason such as "skipped(no-gpu)".
struct StreamSection {
    std::string status = "not-run";
    std::optional<StreamResult> result;
    bool operator==(const StreamSection&) const = default;
};

struct RunArchive {
    int schema_version = kArchiveSchemaVersion;
    MachineDescriptor machine;
    StreamSection cpu_stream;
    StreamSection gpu_stream;
    std::vector<GemmResult> gemm;
    std::vector<EnergyRecord> energy;
    std::optional<PowerWindow> idle_power;
    std::string power_status = "not-run";
    std::string gpu_adapter;
    std::string started_at;
    std::string finished_at;

    bool operator==(const RunArchive&) const = default;
};

// Throws SchemaError: missing chip_id, wrong schema version, duplicate
// (implementation, n) GEMM cells.
void validate_archive(const RunArchive& archive);

std::string serialize_archive(const RunArchive& archive);
// Throws SchemaError naming the unsupported schema_version or bad field.
RunArchive parse_archive(std::string_view text);

void persist(const RunArchive& archive, const std::filesystem::path& path);
RunArchive load_archive(const std::filesystem::path& path);

// "<dir>/run-YYYYmmdd-HHMMSS.json", with "-1", "-2", ... appended until the
// name is unused.
std::filesystem::path unique_archive_path(const std::filesystem::path& dir,
                                          std::chrono::system_clock::time_point when);

// ISO-8601 UTC timestamp.
std::string iso8601_utc(std::chrono::system_clock::time_point when);

} // namespace unibench

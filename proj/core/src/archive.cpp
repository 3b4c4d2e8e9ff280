#include "unibench/archive.hpp"

#include "unibench/errors.hpp"

#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace unibench {

namespace {

using nlohmann::json;

template <typename T>
json opt_to_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from_json(const json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    return j.get<T>();
}

json to_json(const StreamResult& r) {
    json samples = json::array();
    for (const auto& s : r.samples) {
        samples.push_back({{"kernel", std::string(to_string(s.kernel))},
                           {"threads", s.threads},
                           {"times_s", s.times_s},
                           {"best_time_s", s.best_time_s},
                           {"best_bandwidth_gbs", s.best_bandwidth_gbs}});
    }
    return {{"n_elements", r.n_elements},
            {"elem_bytes", r.elem_bytes},
            {"repetitions", r.repetitions},
            {"scalar_q", r.scalar_q},
            {"samples", samples},
            {"validation_passed", r.validation_passed},
            {"validation_message", r.validation_message}};
}

StreamResult stream_from_json(const json& j) {
    StreamResult r;
    r.n_elements = j.at("n_elements").get<std::size_t>();
    r.elem_bytes = j.at("elem_bytes").get<std::size_t>();
    r.repetitions = j.at("repetitions").get<std::size_t>();
    r.scalar_q = j.at("scalar_q").get<double>();
    for (const auto& s : j.at("samples")) {
        KernelSample k;
        const auto name = s.at("kernel").get<std::string>();
        const auto kernel = parse_stream_kernel(name);
        if (!kernel) {
            throw SchemaError("archive: unknown STREAM kernel '" + name + "'");
        }
        k.kernel = *kernel;
        k.threads = s.at("threads").get<std::size_t>();
        k.times_s = s.at("times_s").get<std::vector<double>>();
        k.best_time_s = s.at("best_time_s").get<double>();
        k.best_bandwidth_gbs = s.at("best_bandwidth_gbs").get<double>();
        r.samples.push_back(std::move(k));
    }
    r.validation_passed = j.at("validation_passed").get<bool>();
    r.validation_message = j.at("validation_message").get<std::string>();
    return r;
}

json to_json(const StreamSection& s) {
    return {{"status", s.status}, {"result", s.result ? to_json(*s.result) : json(nullptr)}};
}

StreamSection section_from_json(const json& j) {
    StreamSection s;
    s.status = j.at("status").get<std::string>();
    if (!j.at("result").is_null()) {
        s.result = stream_from_json(j.at("result"));
    }
    return s;
}

json to_json(const PowerWindow& w) {
    return {{"elapsed_s", w.elapsed_s}, {"cpu_w", w.cpu_w}, {"gpu_w", w.gpu_w}};
}

PowerWindow window_from_json(const json& j) {
    return {j.at("elapsed_s").get<double>(), j.at("cpu_w").get<double>(), j.at("gpu_w").get<double>()};
}

json to_json(const GemmResult& r) {
    return {{"implementation", r.implementation},
            {"n", r.n},
            {"times_s", r.times_s},
            {"gflops_best", r.gflops_best},
            {"verified", r.verified},
            {"status", r.status},
            {"max_abs_error", r.max_abs_error},
            {"copy_mode", r.copy_mode}};
}

GemmResult gemm_from_json(const json& j) {
    GemmResult r;
    r.implementation = j.at("implementation").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.times_s = j.at("times_s").get<std::vector<double>>();
    r.gflops_best = j.at("gflops_best").get<double>();
    r.verified = j.at("verified").get<bool>();
    r.status = j.at("status").get<std::string>();
    r.max_abs_error = j.at("max_abs_error").get<double>();
    r.copy_mode = j.value("copy_mode", std::string{});
    return r;
}

json to_json(const EnergyRecord& e) {
    return {{"implementation", e.key.implementation},
            {"n", e.key.n},
            {"repetition", e.key.repetition},
            {"window", to_json(e.window)},
            {"energy_j", e.energy_j},
            {"gflops_per_watt", opt_to_json(e.gflops_per_watt)}};
}

EnergyRecord energy_from_json(const json& j) {
    EnergyRecord e;
    e.key.implementation = j.at("implementation").get<std::string>();
    e.key.n = j.at("n").get<std::size_t>();
    e.key.repetition = j.at("repetition").get<std::size_t>();
    e.window = window_from_json(j.at("window"));
    e.energy_j = j.at("energy_j").get<double>();
    e.gflops_per_watt = opt_from_json<double>(j.at("gflops_per_watt"));
    return e;
}

} // namespace

void validate_archive(const RunArchive& archive) {
    if (archive.schema_version != kArchiveSchemaVersion) {
        throw SchemaError("archive: unsupported schema_version " + std::to_string(archive.schema_version) +
                          " (expected " + std::to_string(kArchiveSchemaVersion) + ")");
    }
    if (archive.machine.chip_id.empty()) {
        throw SchemaError("archive: machine.chip_id is missing");
    }
    std::set<std::pair<std::string, std::size_t>> keys;
    for (const auto& r : archive.gemm) {
        if (!keys.emplace(r.implementation, r.n).second) {
            throw SchemaError("archive: duplicate GEMM result for " + r.implementation + " n=" + std::to_string(r.n));
        }
    }
}

std::string serialize_archive(const RunArchive& a) {
    validate_archive(a);
    json gemm = json::array();
    for (const auto& r : a.gemm) gemm.push_back(to_json(r));
    json energy = json::array();
    for (const auto& e : a.energy) energy.push_back(to_json(e));
    const json doc = {
        {"schema_version", a.schema_version},
        {"machine",
         {{"chip_id", a.machine.chip_id},
          {"device", a.machine.device},
          {"memory", a.machine.memory},
          {"cooling", a.machine.cooling},
          {"os", a.machine.os}}},
        {"started_at", a.started_at},
        {"finished_at", a.finished_at},
        {"gpu_adapter", a.gpu_adapter},
        {"stream", {{"cpu", to_json(a.cpu_stream)}, {"gpu", to_json(a.gpu_stream)}}},
        {"gemm", gemm},
        {"power",
         {{"status", a.power_status},
          {"idle_window", a.idle_power ? to_json(*a.idle_power) : json(nullptr)},
          {"records", energy}}},
    };
    return doc.dump(2) + "\n";
}

RunArchive parse_archive(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("archive: not valid JSON (") + e.what() + ")");
    }
    if (!doc.is_object() || !doc.contains("schema_version")) {
        throw SchemaError("archive: schema_version is missing");
    }
    const json& version = doc.at("schema_version");
    if (!version.is_number_integer() || version.get<int>() != kArchiveSchemaVersion) {
        throw SchemaError("archive: unsupported schema_version " + version.dump() + " (expected " +
                          std::to_string(kArchiveSchemaVersion) + ")");
    }
    RunArchive a;
    try {
        const json& m = doc.at("machine");
        if (!m.contains("chip_id") || !m.at("chip_id").is_string() || m.at("chip_id").get<std::string>().empty()) {
            throw SchemaError("archive: machine.chip_id is missing");
        }
        a.machine.chip_id = m.at("chip_id").get<std::string>();
        a.machine.device = m.value("device", std::string{});
        a.machine.memory = m.value("memory", std::string{});
        a.machine.cooling = m.value("cooling", std::string{});
        a.machine.os = m.value("os", std::string{});
        a.started_at = doc.value("started_at", std::string{});
        a.finished_at = doc.value("finished_at", std::string{});
        a.gpu_adapter = doc.value("gpu_adapter", std::string{});
        a.cpu_stream = section_from_json(doc.at("stream").at("cpu"));
        a.gpu_stream = section_from_json(doc.at("stream").at("gpu"));
        for (const auto& r : doc.at("gemm")) {
            a.gemm.push_back(gemm_from_json(r));
        }
        const json& p = doc.at("power");
        a.power_status = p.at("status").get<std::string>();
        if (!p.at("idle_window").is_null()) {
            a.idle_power = window_from_json(p.at("idle_window"));
        }
        for (const auto& e : p.at("records")) {
            a.energy.push_back(energy_from_json(e));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("archive: ") + e.what());
    }
    validate_archive(a);
    return a;
}

void persist(const RunArchive& archive, const std::filesystem::path& path) {
    const std::string text = serialize_archive(archive);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write archive " + path.string());
    }
    out << text;
    if (!out) {
        throw std::runtime_error("failed writing archive " + path.string());
    }
}

RunArchive load_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError("archive not found: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_archive(buf.str());
}

namespace {

std::tm utc_tm(std::chrono::system_clock::time_point when) {
    const std::time_t t = std::chrono::system_clock::to_time_t(when);
    std::tm tm{};
    gmtime_r(&t, &tm);
    return tm;
}

} // namespace

std::string iso8601_utc(std::chrono::system_clock::time_point when) {
    const std::tm tm = utc_tm(when);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::filesystem::path unique_archive_path(const std::filesystem::path& dir,
                                          std::chrono::system_clock::time_point when) {
    const std::tm tm = utc_tm(when);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    std::filesystem::path candidate = dir / ("run-" + std::string(stamp) + ".json");
    for (int k = 1; std::filesystem::exists(candidate); ++k) {
        candidate = dir / ("run-" + std::string(stamp) + "-" + std::to_string(k) + ".json");
    }
    return candidate;
}

} // namespace unibench

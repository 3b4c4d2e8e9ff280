#include "unibench/device_catalog.hpp"

#include "unibench/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace unibench {

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(std::size_t index, std::string_view field, std::string_view what) {
    std::ostringstream os;
    os << "catalog record " << index << ": field '" << field << "' " << what;
    throw SchemaError(os.str());
}

const json& field(const json& rec, std::size_t index, std::string_view key) {
    auto it = rec.find(key);
    if (it == rec.end()) {
        schema_fail(index, key, "is missing");
    }
    return *it;
}

int int_field(const json& rec, std::size_t index, std::string_view key) {
    const json& v = field(rec, index, key);
    if (!v.is_number_integer()) {
        schema_fail(index, key, "must be an integer");
    }
    return v.get<int>();
}

double real_field(const json& rec, std::size_t index, std::string_view key) {
    const json& v = field(rec, index, key);
    if (!v.is_number()) {
        schema_fail(index, key, "must be a number");
    }
    return v.get<double>();
}

std::string string_field(const json& rec, std::size_t index, std::string_view key) {
    const json& v = field(rec, index, key);
    if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
        schema_fail(index, key, "must be a non-empty string");
    }
    return v.get<std::string>();
}

DeviceSpec parse_record(const json& rec, std::size_t index) {
    if (!rec.is_object()) {
        std::ostringstream os;
        os << "catalog record " << index << " is not an object";
        throw SchemaError(os.str());
    }
    const auto& keys = catalog_keys();
    for (const auto& [key, _] : rec.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            schema_fail(index, key, "is not a catalog key");
        }
    }

    DeviceSpec s;
    s.chip_id = string_field(rec, index, "chip_id");
    s.process_nm = int_field(rec, index, "process_nm");
    s.perf_cores = int_field(rec, index, "perf_cores");
    s.eff_cores = int_field(rec, index, "eff_cores");
    s.cpu_clock_ghz_p = real_field(rec, index, "cpu_clock_ghz_p");
    s.cpu_clock_ghz_e = real_field(rec, index, "cpu_clock_ghz_e");
    s.gpu_cores = {int_field(rec, index, "gpu_cores_min"), int_field(rec, index, "gpu_cores_max")};
    s.gpu_clock_ghz = real_field(rec, index, "gpu_clock_ghz");
    s.fp32_tflops = {real_field(rec, index, "fp32_tflops_min"), real_field(rec, index, "fp32_tflops_max")};
    s.mem_technology = string_field(rec, index, "mem_technology");
    s.mem_bandwidth_gbs = real_field(rec, index, "mem_bandwidth_gbs");

    const json& opts = field(rec, index, "mem_gb_options");
    if (!opts.is_array()) {
        schema_fail(index, "mem_gb_options", "must be a list of integers");
    }
    for (const auto& v : opts) {
        if (!v.is_number_integer() || v.get<int>() <= 0) {
            schema_fail(index, "mem_gb_options", "must be a list of positive integers");
        }
        s.mem_gb_options.push_back(v.get<int>());
    }

    if (s.process_nm < 0) {
        schema_fail(index, "process_nm", "must be non-negative");
    }
    if (s.perf_cores < 0 || s.eff_cores < 0 || s.perf_cores + s.eff_cores < 1) {
        schema_fail(index, "perf_cores", "with eff_cores must total at least one core");
    }
    if (s.gpu_cores.min < 0 || s.gpu_cores.max < s.gpu_cores.min) {
        schema_fail(index, "gpu_cores_max", "must be >= gpu_cores_min >= 0");
    }
    if (!(s.fp32_tflops.min > 0.0)) {
        schema_fail(index, "fp32_tflops_min", "must be > 0");
    }
    if (s.fp32_tflops.max < s.fp32_tflops.min) {
        schema_fail(index, "fp32_tflops_max", "must be >= fp32_tflops_min");
    }
    if (!(s.mem_bandwidth_gbs > 0.0)) {
        schema_fail(index, "mem_bandwidth_gbs", "must be > 0");
    }
    return s;
}

} // namespace

const std::vector<std::string_view>& catalog_keys() {
    static const std::vector<std::string_view> keys = {
        "chip_id",         "process_nm",      "perf_cores",     "eff_cores",     "cpu_clock_ghz_p",
        "cpu_clock_ghz_e", "gpu_cores_min",   "gpu_cores_max",  "gpu_clock_ghz", "fp32_tflops_min",
        "fp32_tflops_max", "mem_technology",  "mem_gb_options", "mem_bandwidth_gbs",
    };
    return keys;
}

double fp32_peak_gflops(const DeviceSpec& spec, PeakChoice choice) {
    const double tflops = choice == PeakChoice::Max ? spec.fp32_tflops.max : spec.fp32_tflops.min;
    return tflops * 1000.0;
}

Catalog::Catalog(std::map<std::string, DeviceSpec, std::less<>> entries, std::string source_path)
    : entries_(std::move(entries)), source_path_(std::move(source_path)) {}

const DeviceSpec* Catalog::find(std::string_view chip_id) const {
    auto it = entries_.find(chip_id);
    return it == entries_.end() ? nullptr : &it->second;
}

const DeviceSpec& Catalog::at(std::string_view chip_id) const {
    if (const auto* spec = find(chip_id)) {
        return *spec;
    }
    throw std::out_of_range("chip '" + std::string(chip_id) + "' not in catalog " + source_path_);
}

Catalog parse_catalog(std::string_view text, std::string source_path) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(source_path + ": not a valid catalog document (" + e.what() + ")");
    }
    if (!doc.is_array()) {
        throw SchemaError(source_path + ": catalog must be a list of chip records");
    }
    if (doc.empty()) {
        throw SchemaError(source_path + ": catalog contains no records");
    }
    std::map<std::string, DeviceSpec, std::less<>> entries;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        DeviceSpec spec = parse_record(doc[i], i);
        const std::string id = spec.chip_id;
        if (!entries.emplace(id, std::move(spec)).second) {
            throw SchemaError(source_path + ": duplicate chip_id '" + id + "' at record " + std::to_string(i));
        }
    }
    return Catalog(std::move(entries), std::move(source_path));
}

Catalog load_catalog(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError("catalog file not found: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_catalog(buf.str(), path.string());
}

std::filesystem::path default_catalog_path() {
    namespace fs = std::filesystem;
    if (const char* env = std::getenv("UNIBENCH_CATALOG"); env != nullptr && *env != '\0') {
        return env;
    }
    const fs::path installed = fs::path(UNIBENCH_DATA_DIR_INSTALL) / "catalog.json";
    std::error_code ec;
    if (fs::exists(installed, ec)) {
        return installed;
    }
    return fs::path(UNIBENCH_DATA_DIR_BUILD) / "catalog.json";
}

double efficiency_ratio(double measured, double peak) {
    if (!(peak > 0.0)) {
        throw DomainError("efficiency_ratio: peak must be > 0");
    }
    if (measured < 0.0) {
        throw DomainError("efficiency_ratio: measured must be >= 0");
    }
    return measured / peak;
}

} // namespace unibench

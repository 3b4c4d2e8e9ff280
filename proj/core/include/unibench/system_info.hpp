#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace unibench {

// Best-effort host queries. Every function falls back to a conservative
// value rather than failing.
std::size_t physical_core_count();
std::uint64_t physical_memory_bytes();
// Largest cache level reported by the OS; 0 when unknown.
std::uint64_t last_level_cache_bytes();
std::string os_description();
// CPU brand string, e.g. "Apple M4". Empty when unknown.
std::string cpu_brand();
// Chip id in catalog form ("M1".."M4") when running on Apple Silicon.
std::optional<std::string> detect_apple_chip();

} // namespace unibench

#pragma once

#include "pmfno/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pmfno {

using json = nlohmann::ordered_json;

inline constexpr std::uint32_t kContainerVersion = 1;

// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(const void* data, std::size_t n_bytes);
std::string hash_hex(std::uint64_t h);

// Binary blob: magic "PMFN", u32 little-endian version, then little-endian
// f32 payload. All persisted numeric state round-trips bitwise at f32.
void write_pmfn_blob(const std::filesystem::path& file, const std::vector<float>& payload);
std::vector<float> read_pmfn_blob(const std::filesystem::path& file);

void write_manifest(const std::filesystem::path& dir, const json& manifest);
json read_manifest(const std::filesystem::path& dir);

// Exact round trip between f64 working values and the f32 stored form.
inline float to_stored(double v) { return static_cast<float>(v); }
inline double from_stored(float v) { return static_cast<double>(v); }

// Decimal serialization for scalars kept outside the blob (exact for f64).
std::string f64_to_string(double v);
double f64_from_string(const std::string& s);

}  // namespace pmfno

#include "pmfno/container.hpp"

#include <charconv>
#include <cstring>
#include <fstream>

namespace pmfno {

std::uint64_t fnv1a64(const void* data, std::size_t n_bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n_bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_pmfn_blob(const std::filesystem::path& file, const std::vector<float>& payload) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error(Error::Code::config, "cannot open " + file.string() + " for writing");
  os.write("PMFN", 4);
  const std::uint32_t version = kContainerVersion;
  os.write(reinterpret_cast<const char*>(&version), 4);  // little-endian host
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!os) throw Error(Error::Code::config, "short write to " + file.string());
}

std::vector<float> read_pmfn_blob(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary | std::ios::ate);
  if (!is) throw Error(Error::Code::config, "cannot open " + file.string());
  const std::streamsize total = is.tellg();
  if (total < 8) throw Error(Error::Code::config, file.string() + ": truncated header");
  is.seekg(0);

  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, "PMFN", 4) != 0)
    throw Error(Error::Code::config, file.string() + ": bad magic");
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  if (version != kContainerVersion)
    throw Error(Error::Code::config, file.string() + ": unsupported container version " +
                                         std::to_string(version));

  const std::streamsize body = total - 8;
  if (body % static_cast<std::streamsize>(sizeof(float)) != 0)
    throw Error(Error::Code::config, file.string() + ": truncated payload");
  std::vector<float> payload(static_cast<std::size_t>(body) / sizeof(float));
  is.read(reinterpret_cast<char*>(payload.data()), body);
  if (!is) throw Error(Error::Code::config, file.string() + ": short read");
  return payload;
}

void write_manifest(const std::filesystem::path& dir, const json& manifest) {
  std::ofstream os(dir / "manifest.json");
  if (!os) throw Error(Error::Code::config, "cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

json read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw Error(Error::Code::config, "cannot open manifest in " + dir.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(Error::Code::config, "malformed manifest in " + dir.string() + ": " + e.what());
  }
  return j;
}

std::string f64_to_string(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double f64_from_string(const std::string& s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw Error(Error::Code::config, "malformed decimal scalar: '" + s + "'");
  return v;
}

}  // namespace pmfno

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace liqjump {

inline constexpr const char* kManifestName = "manifest.txt";

struct ManifestEntry {
  std::string path;  // relative, forward slashes
  std::string sha256;
  std::uintmax_t bytes = 0;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

// Every regular file under dir except the manifest itself, sorted by path.
std::vector<ManifestEntry> build_manifest(const std::string& dir);

// Writes <dir>/manifest.txt as `sha256  bytes  path` lines and returns its path.
std::string write_manifest(const std::string& dir);

}  // namespace liqjump

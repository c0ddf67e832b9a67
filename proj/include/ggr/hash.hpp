#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace ggr {

// FNV-1a 64-bit, used for run-manifest input checksums.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(uint64_t v);

}  // namespace ggr

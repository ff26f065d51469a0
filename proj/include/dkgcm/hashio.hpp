#pragma once

#include <cstdint>
#include <string>

namespace dkgcm {

/// FNV-1a 64-bit over a byte string.
std::uint64_t fnv1a64(const std::string& bytes);

/// FNV-1a 64-bit over a file's raw contents.
std::uint64_t hash_file(const std::string& path);

std::string hash_hex(std::uint64_t h);

}  // namespace dkgcm

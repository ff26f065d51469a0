#include "dkgcm/hashio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dkgcm/common.hpp"

namespace dkgcm {

namespace {
constexpr std::uint64_t kOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kPrime = 0x100000001b3ull;
}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = kOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kPrime;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "hash_file: cannot open " + path);
  std::uint64_t h = kOffset;
  char buf[1 << 16];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= kPrime;
    }
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dkgcm

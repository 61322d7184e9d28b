#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace crossgr {

// FNV-1a, used for vocab/config digests. Not cryptographic; just a stable
// fingerprint for detecting checkpoint/data mismatches.
struct Fnv1a64 {
  std::uint64_t state = 0xcbf29ce484222325ULL;

  void update(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state ^= bytes[i];
      state *= 0x100000001b3ULL;
    }
  }
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update(std::uint64_t v) { update(&v, sizeof(v)); }

  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(state));
    return std::string(buf);
  }
};

}  // namespace crossgr

#include "saekit/common.hpp"

#include <array>
#include <cstdio>

namespace saekit {

std::string content_hash_hex(std::string_view data) {
  // Two FNV streams with different bases give a 128-bit id; collisions at
  // desk-scale task counts are negligible.
  const uint64_t a = fnv1a64(data);
  const uint64_t b = fnv1a64(data, 0x9ae16a3b2f90404fULL);
  std::array<char, 33> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx%016llx",
                static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b));
  return std::string(buf.data(), 32);
}

}  // namespace saekit

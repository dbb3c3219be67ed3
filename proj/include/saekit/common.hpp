#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace saekit {

using LatentId = uint32_t;

// Error raised when an input file or record violates its format contract.
// Carries enough context (offset / line / doc ordinal) to locate the problem.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Error raised when an operation's precondition is violated.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

// Error raised on gateway/provider failures (timeouts, bad responses).
class GatewayError : public std::runtime_error {
 public:
  explicit GatewayError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG helpers.
//
// std::normal_distribution and friends are implementation-defined, so every
// random draw in the library goes through these helpers to keep generated
// corpora and mock annotations bit-identical across platforms.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Combines a base seed with a stream index (e.g. doc ordinal) into a fresh
// seed, so per-document substreams stay independent of thread scheduling.
inline uint64_t substream_seed(uint64_t seed, uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x51ed270b7a2ff0b1ULL));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) {
    // Rejection sampling over the top range keeps the draw unbiased.
    const uint64_t limit = n * (UINT64_MAX / n);
    uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (deterministic, unlike std::normal_distribution).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Index of the next success of a Bernoulli(p) stream starting at `start`,
  // via geometric skipping. Returns an index >= start; caller loops until the
  // returned index passes the end of the range.
  uint64_t next_success(uint64_t start, double p) {
    if (p >= 1.0) return start;
    if (p <= 0.0) return UINT64_MAX;
    double u = uniform();
    while (u <= 0.0) u = uniform();
    const double skip = std::floor(std::log(u) / std::log1p(-p));
    if (skip >= 9.0e18) return UINT64_MAX;
    return start + static_cast<uint64_t>(skip);
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Stable content hashing (FNV-1a, two independent 64-bit streams).
// Used for gateway task ids and mock determinism; not cryptographic.
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(std::string_view data, uint64_t basis = 0xcbf29ce484222325ULL) {
  uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string content_hash_hex(std::string_view data);

}  // namespace saekit

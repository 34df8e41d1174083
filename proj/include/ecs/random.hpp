#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <random>
#include <string>
#include <system_error>

#include "ecs/error.hpp"

namespace ecs {

/// Deterministic generator. The standard distributions are
/// implementation-defined, so uniforms are drawn from the raw 64-bit stream to
/// keep certificates byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

inline constexpr std::uint64_t kDefaultSeed = 20240917;

/// Seed from ECS_SEED when set, otherwise `fallback`. A malformed value is an
/// input error.
inline std::uint64_t seed_from_env(std::uint64_t fallback = kDefaultSeed) {
  if (const char* s = std::getenv("ECS_SEED")) {
    std::uint64_t v = 0;
    const char* end = s + std::strlen(s);
    const auto res = std::from_chars(s, end, v);
    if (res.ec != std::errc() || res.ptr != end || res.ptr == s)
      throw InputError(std::string("ECS_SEED must be an unsigned integer, got '") + s + "'");
    return v;
  }
  return fallback;
}

}  // namespace ecs

#include "mir/rng.hpp"

#include <cmath>

namespace mir {

namespace {
constexpr u64 kGolden = 0x9e3779b97f4a7c15ULL;
}

u64 mix64(u64 x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

u64 mix_key(const StreamKey& key) {
  u64 h = mix64(key.seed + kGolden);
  h = mix64(h ^ (key.a + kGolden));
  h = mix64(h ^ (key.b + kGolden));
  h = mix64(h ^ (key.c + kGolden));
  return h;
}

u64 fnv1a(std::string_view s) {
  u64 h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

u64 CounterRng::next_u64() {
  ++counter_;
  return mix64(key_ + kGolden * counter_);
}

double CounterRng::uniform() {
  // Top 53 bits -> [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double CounterRng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller; u1 shifted into (0, 1] to keep the log finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 6.283185307179586476925286766559 * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

i64 CounterRng::below(i64 n) {
  if (n <= 0) throw ShapeError("CounterRng::below: n must be positive, got " + std::to_string(n));
  // Lemire multiply-shift; bias is negligible for the small n used here.
  const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<i64>(wide >> 64);
}

}  // namespace mir

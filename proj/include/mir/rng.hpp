#pragma once

#include <string_view>

#include "mir/common.hpp"

namespace mir {

// Stream identity for the counter-based generator. Streams are keyed by
// context (e.g. global seed, step, sample, block) so that a draw depends
// only on its key, never on execution order.
struct StreamKey {
  u64 seed = 0;
  u64 a = 0;
  u64 b = 0;
  u64 c = 0;
};

// SplitMix64 finalizer.
u64 mix64(u64 x);
// Folds the four key fields into one 64-bit stream key.
u64 mix_key(const StreamKey& key);
// FNV-1a, used to derive per-name parameter init streams.
u64 fnv1a(std::string_view s);

// Counter-based generator: output i is a pure function of (key, i).
class CounterRng {
 public:
  explicit CounterRng(const StreamKey& key) : key_fields_(key), key_(mix_key(key)) {}
  CounterRng(u64 seed, u64 a = 0, u64 b = 0, u64 c = 0) : CounterRng(StreamKey{seed, a, b, c}) {}

  u64 next_u64();
  double uniform();            // [0, 1)
  double uniform(double lo, double hi);
  double normal();             // standard normal (Box-Muller)
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  i64 below(i64 n);            // uniform over [0, n)

  const StreamKey& key() const { return key_fields_; }
  u64 counter() const { return counter_; }

 private:
  StreamKey key_fields_;
  u64 key_;
  u64 counter_ = 0;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace mir

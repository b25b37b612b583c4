#pragma once

#include "mir/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mir::par {

// Process-wide switch between the OpenMP kernels and their serial
// references. Both paths produce bitwise-identical results; the switch
// exists so tests and the benchmark can exercise each side explicitly.
inline bool& omp_enabled() {
  static bool enabled = true;
  return enabled;
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Temporarily force the serial path.
class SerialScope {
 public:
  SerialScope() : prev_(omp_enabled()) { omp_enabled() = false; }
  ~SerialScope() { omp_enabled() = prev_; }

 private:
  bool prev_;
};

}  // namespace mir::par

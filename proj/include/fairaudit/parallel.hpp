#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fairaudit {

// How replicate loops run. The serial path is the reference implementation;
// the OpenMP path must produce byte-identical results, which tests enforce.
enum class ExecMode { serial, openmp };

inline int resolve_threads(int parallelism) {
#ifdef _OPENMP
  return parallelism > 0 ? parallelism : omp_get_max_threads();
#else
  (void)parallelism;
  return 1;
#endif
}

// Runs fn(r) for r in [0, n). Each replicate must derive all randomness
// from its own index and write only to its own slot; aggregation happens
// after the loop, in index order.
template <class Fn>
void for_each_replicate(int64_t n, int parallelism, ExecMode mode, Fn&& fn) {
  if (mode == ExecMode::serial) {
    for (int64_t r = 0; r < n; ++r) fn(r);
    return;
  }
#ifdef _OPENMP
  const int threads = resolve_threads(parallelism);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int64_t r = 0; r < n; ++r) fn(r);
#else
  for (int64_t r = 0; r < n; ++r) fn(r);
#endif
}

}  // namespace fairaudit

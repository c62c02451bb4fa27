#pragma once

#include <cstdlib>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fsfl::par {

/// Worker-pool size override, 0 = use environment / OpenMP default.
/// Tests set this to pin serial vs parallel execution.
int& worker_override();

/// Effective worker count: override if set, else FSFL_WORKERS env var,
/// else the OpenMP default (1 in non-OpenMP builds).
int worker_count();

/// Runs body(i) for i in [0, n). With one worker this is a plain serial loop;
/// otherwise iterations are distributed over an OpenMP team. Bodies must not
/// share mutable state; each iteration writes only to its own output slot, so
/// both paths produce bit-identical results.
template <typename F>
void parallel_for(int n, F&& body) {
  const int workers = worker_count();
#ifdef _OPENMP
  if (workers > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  (void)workers;
  for (int i = 0; i < n; ++i) body(i);
}

}  // namespace fsfl::par

#include "fsfl/parallel.hpp"

namespace fsfl::par {

int& worker_override() {
  static int v = 0;
  return v;
}

int worker_count() {
  if (worker_override() > 0) return worker_override();
  if (const char* env = std::getenv("FSFL_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace fsfl::par

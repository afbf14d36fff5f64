#pragma once

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ethsim {

// Serial is the reference implementation; Parallel distributes loop indices
// over an OpenMP team. Bodies must write only to their own index's slot, so
// results are identical in both modes.
enum class ExecMode { Serial, Parallel };

template <class F>
void parallel_for(long n, ExecMode mode, int threads, F&& body) {
  if (mode == ExecMode::Serial || n < 2) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : omp_get_max_threads())
#endif
  for (long i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ethsim

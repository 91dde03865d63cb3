#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace semcom {

// Resolve a job-count request: 0 means "all hardware threads", anything
// else is taken literally. Without OpenMP everything runs serially.
inline int effective_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs <= 0) return omp_get_max_threads();
  return jobs;
#else
  (void)jobs;
  return 1;
#endif
}

// Data-parallel loop over [0, count). jobs == 1 selects the serial
// reference path; any other value runs the same body under OpenMP.
// Bodies must write only to their own index's slot so that results are
// identical for every jobs value.
template <class Body>
void parallel_for(std::size_t count, int jobs, Body&& body) {
  const int n = effective_jobs(jobs);
#ifdef _OPENMP
  if (n > 1) {
#pragma omp parallel for schedule(static) num_threads(n)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
      body(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < count; ++i) body(i);
}

}  // namespace semcom

#include "mign/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mign {

namespace {
Exec g_default = Exec::openmp;
}

Exec default_exec() { return g_default; }

void set_default_exec(Exec e) { g_default = e; }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace detail {

void parallel_for_impl(std::size_t n, Exec ex, void* ctx, void (*fn)(void*, std::size_t)) {
#ifdef _OPENMP
  if (ex == Exec::openmp && n > 1) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      fn(ctx, static_cast<std::size_t>(i));
    return;
  }
#else
  (void)ex;
#endif
  for (std::size_t i = 0; i < n; ++i) fn(ctx, i);
}

}  // namespace detail

}  // namespace mign

#pragma once

#include <cstddef>

namespace mign {

// Execution backend for the data-parallel kernels. The serial path is the
// reference implementation used by the equivalence tests; the OpenMP path
// must produce bitwise-identical results, which every kernel guarantees by
// writing only to slots owned by its loop index (no cross-iteration
// floating-point reductions).
enum class Exec { serial, openmp };

Exec default_exec();
void set_default_exec(Exec e);
int max_threads();

namespace detail {
void parallel_for_impl(std::size_t n, Exec ex, void* ctx, void (*fn)(void*, std::size_t));
}

template <class F>
void parallel_for(std::size_t n, Exec ex, F&& body) {
  detail::parallel_for_impl(n, ex, &body, [](void* ctx, std::size_t i) {
    (*static_cast<F*>(ctx))(i);
  });
}

}  // namespace mign

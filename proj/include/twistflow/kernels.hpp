#pragma once

#include <cstddef>

namespace twistflow {

/// Execution policy for grid-pointwise kernels. Serial is the reference the
/// OpenMP path is tested against.
enum class Exec { Serial, Parallel };

Exec default_exec();
void set_default_exec(Exec exec);

/// Caps OpenMP threads; values < 1 leave the runtime default.
void set_thread_limit(int threads);
int thread_limit();

template <class Fn>
void for_each_point(std::size_t count, Fn&& fn, Exec exec = default_exec()) {
  if (exec == Exec::Serial) {
    for (std::size_t p = 0; p < count; ++p) fn(p);
    return;
  }
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) fn(static_cast<std::size_t>(p));
}

}  // namespace twistflow

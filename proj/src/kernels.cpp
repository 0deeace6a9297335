#include "twistflow/kernels.hpp"

#include <atomic>

#include <omp.h>

namespace twistflow {
namespace {
std::atomic<Exec> g_exec{Exec::Parallel};
}

Exec default_exec() { return g_exec.load(); }
void set_default_exec(Exec exec) { g_exec.store(exec); }

void set_thread_limit(int threads) {
  if (threads >= 1) omp_set_num_threads(threads);
}

int thread_limit() { return omp_get_max_threads(); }

}  // namespace twistflow

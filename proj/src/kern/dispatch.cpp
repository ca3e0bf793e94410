#include <atomic>

#include "tgseg/kern/kernels.hpp"

namespace tgseg::kern {

const Ops* avx2_ops_table();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<bool> g_force_scalar{false};

const Ops* detect_avx2() {
  static const Ops* table = cpu_has_avx2_fma() ? avx2_ops_table() : nullptr;
  return table;
}

}  // namespace

const Ops* avx2_ops() { return detect_avx2(); }

const Ops& ops() {
  if (g_force_scalar.load(std::memory_order_relaxed)) return scalar_ops();
  const Ops* simd = detect_avx2();
  return simd ? *simd : scalar_ops();
}

const char* active_isa() {
  return (&ops() == avx2_ops()) ? "avx2" : "scalar";
}

void force_scalar(bool on) { g_force_scalar.store(on, std::memory_order_relaxed); }

}  // namespace tgseg::kern

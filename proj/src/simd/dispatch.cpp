#include <atomic>
#include <cstdlib>
#include <string>

#include "loco/error.hpp"
#include "loco/simd/kernels.hpp"

namespace loco::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() noexcept {
  if (const char* env = std::getenv("LOCO_SIMD")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{&table(detect())};
  return current;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool supported(Isa isa) noexcept {
  if (isa == Isa::scalar) return true;
  return detail::avx2_table() != nullptr && cpu_has_avx2();
}

const KernelTable& table(Isa isa) {
  if (isa == Isa::avx2) {
    require(supported(Isa::avx2), ErrorCode::configuration, "AVX2 kernels unavailable on this host");
    return *detail::avx2_table();
  }
  return detail::scalar_table;
}

Isa active_isa() noexcept {
  return slot().load(std::memory_order_acquire) == &detail::scalar_table ? Isa::scalar : Isa::avx2;
}

void set_active_isa(Isa isa) { slot().store(&table(isa), std::memory_order_release); }

const KernelTable& active() noexcept { return *slot().load(std::memory_order_acquire); }

}  // namespace loco::simd

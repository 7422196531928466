#include <atomic>
#include <string>

#include "cvr/error.hpp"
#include "cvr/kernels.hpp"

namespace cvr::kernels {

#ifndef CVR_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(CVR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return &scalar_table();
    case Isa::Avx2: return cpu_has_avx2() ? avx2_table() : nullptr;
  }
  return nullptr;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{table_for(best_isa())};
  return slot;
}

}  // namespace

bool isa_supported(Isa isa) { return table_for(isa) != nullptr; }

Isa best_isa() { return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar; }

Isa active_isa() { return active().isa; }

void set_active_isa(Isa isa) {
  const KernelTable* table = table_for(isa);
  if (table == nullptr) {
    throw Error(Errc::UsageError, "kernel ISA '" + std::string(isa_name(isa)) +
                                      "' is not available on this CPU/build");
  }
  active_slot().store(table);
}

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "auto") return best_isa();
  throw Error(Errc::UsageError, "unknown kernel ISA '" + std::string(name) + "'");
}

}  // namespace cvr::kernels

#pragma once
// Dense float64 inner loops used by the adapter, the losses and scoring.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2/FMA
// variant is compiled into a separate translation unit and selected at
// runtime when the CPU reports support. The two variants agree to rounding
// (the vector variants reassociate sums), which tests/test_kernels.cpp checks.

#include <cstddef>
#include <span>
#include <string_view>

namespace cvr::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // y = W x, W row-major rows x cols
  void (*gemv)(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
  // out += W^T g
  void (*gemv_t_acc)(const double* w, const double* g, double* out, std::size_t rows,
                     std::size_t cols);
  // W += g x^T
  void (*ger_acc)(const double* g, const double* x, double* w, std::size_t rows,
                  std::size_t cols);
  // One AdamW update over n parameters. `decay` is (1 - lr * wd); bias
  // corrections are 1 - beta^t.
  void (*adamw)(double* theta, const double* grad, double* m, double* v, std::size_t n,
                double lr, double decay, double beta1, double beta2, double bias1, double bias2,
                double eps);
};

const KernelTable& scalar_table();
// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

bool isa_supported(Isa isa);
Isa best_isa();
Isa active_isa();
// Throws cvr::Error(UsageError) if the CPU or build lacks the requested ISA.
void set_active_isa(Isa isa);
const KernelTable& active();

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);  // "scalar" | "avx2" | "auto"

// Span conveniences over the active table. Lengths are checked by callers.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

}  // namespace cvr::kernels

#pragma once
// Dense vector primitives with forward and vector-Jacobian (backward) forms.
// All arithmetic is float64; every backward takes the upstream gradient of
// the op's output and returns (or accumulates) gradients of its inputs.

#include <cstddef>
#include <span>
#include <vector>

#include "cvr/rng.hpp"

namespace cvr::math {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

inline constexpr double kEpsilonNorm = 1e-12;
inline constexpr double kEpsilonLayerNorm = 1e-5;

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  MutSpan row(std::size_t r) { return {data.data() + r * cols, cols}; }
  ConstSpan row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  static Matrix identity(std::size_t n);
};

double dot(ConstSpan a, ConstSpan b);
double norm(ConstSpan x);
void add_into(ConstSpan x, MutSpan y);  // y += x
Vector add(ConstSpan a, ConstSpan b);
Vector concat(ConstSpan a, ConstSpan b);
bool all_finite(ConstSpan x);

// --- L2 normalization ------------------------------------------------------

// Throws NormUnderflow when ||x|| <= kEpsilonNorm.
Vector l2_normalize(ConstSpan x);

struct NormalizeCache {
  Vector y;
  double norm = 0.0;
};
NormalizeCache l2_normalize_fwd(ConstSpan x);
// Same as l2_normalize_fwd, but a vector at or below the norm floor gets
// kEpsilonNorm added to its first coordinate instead of raising. Used by the
// prediction heads, whose pre-normalization sum can vanish (zero parameters,
// zero anchor).
NormalizeCache l2_normalize_floor_fwd(ConstSpan x);
Vector l2_normalize_bwd(const NormalizeCache& cache, ConstSpan grad_y);

// --- cosine similarity -----------------------------------------------------

double cosine_sim(ConstSpan a, ConstSpan b);
struct CosineGrads {
  Vector a;
  Vector b;
};
CosineGrads cosine_sim_bwd(ConstSpan a, ConstSpan b, double grad_out);

// --- linear ----------------------------------------------------------------

Vector linear_fwd(ConstSpan x, const Matrix& w, ConstSpan b);
// Bias-free variant.
Vector matvec(const Matrix& w, ConstSpan x);
// Returns grad_x; accumulates into grad_w and (if non-empty) grad_b.
Vector linear_bwd(ConstSpan x, const Matrix& w, ConstSpan grad_y, Matrix& grad_w,
                  MutSpan grad_b);

// --- layer norm ------------------------------------------------------------

struct LayerNormCache {
  Vector x_hat;
  double inv_std = 0.0;
};
Vector layer_norm_fwd(ConstSpan x, ConstSpan gamma, ConstSpan beta, LayerNormCache* cache = nullptr);
// Returns grad_x; accumulates into grad_gamma / grad_beta.
Vector layer_norm_bwd(const LayerNormCache& cache, ConstSpan gamma, ConstSpan grad_y,
                      MutSpan grad_gamma, MutSpan grad_beta);

// --- softmax ---------------------------------------------------------------

// mask[i] == true marks position i as masked out (probability exactly 0).
// An empty mask means nothing is masked. Throws AllMasked.
Vector stable_softmax(ConstSpan logits, const std::vector<bool>& mask = {});
Vector softmax_bwd(ConstSpan probs, ConstSpan grad_probs);

// --- activations -----------------------------------------------------------

Vector relu_fwd(ConstSpan x);
Vector relu_bwd(ConstSpan x, ConstSpan grad_y);

// Inverted dropout: kept units are scaled by 1/(1-rate), so the returned
// `scale` vector holds 0 or 1/(1-rate) per unit.
struct DropoutResult {
  Vector y;
  Vector scale;
};
DropoutResult dropout_fwd(ConstSpan x, double rate, Rng& rng);
Vector dropout_bwd(ConstSpan scale, ConstSpan grad_y);

}  // namespace cvr::math

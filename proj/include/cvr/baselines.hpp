#pragma once
// Trainable baselines.
//
// Early fusion: a two-layer MLP on [q; anchor; mean(history)].
//   direct:   v_hat = normalize(MLP(z))
//   residual: v_hat = normalize(anchor + MLP(z))
// Learned late fusion: a two-layer MLP mapping the score pair (A, B) of a
// candidate to a scalar ranking score.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cvr/params.hpp"
#include "cvr/predictor.hpp"

namespace cvr::model {

struct EarlyFusionTape;

struct EarlyFusionParams {
  using Tape = EarlyFusionTape;

  std::size_t d = 0;
  std::size_t hidden = 0;
  bool residual = false;
  math::Matrix w1;  // hidden x 3d
  math::Vector b1;
  math::Matrix w2;  // d x hidden
  math::Vector b2;

  const char* kind() const { return residual ? "ef-residual" : "ef-direct"; }
  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
};

EarlyFusionParams make_early_fusion_params(std::size_t d, std::size_t hidden, bool residual);
EarlyFusionParams init_early_fusion_params(std::size_t d, std::size_t hidden, bool residual,
                                           std::uint64_t seed);

struct EarlyFusionTape {
  std::size_t d = 0;
  math::Vector z;
  math::Vector h1;
  math::Vector r1;
  math::NormalizeCache out;
};

math::Vector predict(const EarlyFusionParams& p, const PredictorInput& in,
                     const ForwardOptions& opt, EarlyFusionTape* tape = nullptr);
void backward(const EarlyFusionParams& p, const EarlyFusionTape& tape, math::ConstSpan grad_v_hat,
              EarlyFusionParams& grads);

Checkpoint to_checkpoint(const EarlyFusionParams& p);
EarlyFusionParams early_fusion_from_checkpoint(const Checkpoint& ckpt);

struct LateFusionTape {
  double a = 0.0;
  double b = 0.0;
  math::Vector h1;
};

struct LateFusionParams {
  static constexpr const char* kKind = "late-fusion";

  std::size_t hidden = 8;
  math::Matrix w1;  // hidden x 2
  math::Vector b1;
  math::Matrix w2;  // 1 x hidden
  math::Vector b2;  // 1

  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
};

LateFusionParams make_late_fusion_params(std::size_t hidden);
LateFusionParams init_late_fusion_params(std::size_t hidden, std::uint64_t seed);
// Parameters whose score equals a + alpha * b + offset on [-1,1]^2: one
// hidden unit carries a + alpha*b + offset (kept positive by the offset).
LateFusionParams late_fusion_weighted_sum(std::size_t hidden, double alpha);

double late_fusion_score(const LateFusionParams& p, double a, double b,
                         LateFusionTape* tape = nullptr);
// Accumulates parameter gradients for upstream d(loss)/d(score).
void late_fusion_backward(const LateFusionParams& p, const LateFusionTape& tape, double grad_score,
                          LateFusionParams& grads);

Checkpoint to_checkpoint(const LateFusionParams& p);
LateFusionParams late_fusion_from_checkpoint(const Checkpoint& ckpt);

}  // namespace cvr::model

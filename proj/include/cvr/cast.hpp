#pragma once
// Dual-path residual state-transition predictor.
//
//   v_hat = normalize(anchor + delta_cond + delta_ctx)
//   delta_cond = Linear(2d,d)(Dropout(ReLU(LN(Linear(2d,2d)([q; anchor])))))
//   delta_ctx  = attended + MLP(LN(attended)),  MLP = Linear(d,d) . ReLU . Linear(d,d)
//   attended   = Wo * MultiHead(query = Wq q, keys = values = Wh H)
//
// H is left-padded with zero rows to context_len; padded keys are masked.
// With an empty history the context path is skipped (delta_ctx = 0).

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cvr/params.hpp"
#include "cvr/predictor.hpp"

namespace cvr::model {

struct CastTape;

struct CastParams {
  using Tape = CastTape;
  static constexpr const char* kKind = "cast";

  std::size_t d = 0;
  std::size_t n_heads = 8;
  std::size_t context_len = 5;

  // instruction-conditioned path
  math::Matrix w1;  // 2d x 2d
  math::Vector b1;
  math::Vector ln1_gamma;
  math::Vector ln1_beta;
  math::Matrix w2;  // d x 2d
  math::Vector b2;
  // context path
  math::Matrix wq;  // d x d, bias-free
  math::Matrix wh;  // d x d, bias-free
  math::Matrix wo;  // d x d, bias-free
  math::Vector ln2_gamma;
  math::Vector ln2_beta;
  math::Matrix wa;
  math::Vector ba;
  math::Matrix wb;
  math::Vector bb;

  std::size_t head_dim() const { return d / n_heads; }
  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
};

// Shapes allocated, weights zero, LN gamma = 1. Throws BadDims.
CastParams make_cast_params(std::size_t d, std::size_t n_heads, std::size_t context_len);
// Xavier-uniform weights, zero biases, LN gamma 1 / beta 0; deterministic per seed.
CastParams init_cast_params(std::size_t d, std::size_t n_heads, std::size_t context_len,
                            std::uint64_t seed);

struct CastTape {
  std::size_t d = 0;
  std::size_t context_len = 0;
  // conditioned path
  math::Vector cond_in;
  math::Vector h1;
  math::LayerNormCache ln1;
  math::Vector n1;
  math::Vector dropout_scale;
  math::Vector dropped;
  // context path
  bool has_context = false;
  std::size_t padding = 0;
  math::Matrix history;  // padded, context_len x d
  math::Vector query_proj;
  math::Matrix keys;  // context_len x d
  std::vector<math::Vector> probs;  // per head, context_len
  math::Vector heads_out;
  math::Vector attended;
  math::LayerNormCache ln2;
  math::Vector ln2_out;
  math::Vector m1;
  math::Vector r2;
  // output
  math::NormalizeCache out;
};

// Throws ShapeMismatch, HistoryTooLong.
math::Vector predict(const CastParams& p, const PredictorInput& in, const ForwardOptions& opt,
                     CastTape* tape = nullptr);
// Accumulates parameter gradients for upstream grad_v_hat. Throws TapeMismatch.
void backward(const CastParams& p, const CastTape& tape, math::ConstSpan grad_v_hat,
              CastParams& grads);

Checkpoint to_checkpoint(const CastParams& p);
CastParams cast_from_checkpoint(const Checkpoint& ckpt);

}  // namespace cvr::model

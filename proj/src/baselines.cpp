#include "cvr/baselines.hpp"

#include <cmath>
#include <string>

#include "cvr/error.hpp"
#include "cvr/kernels.hpp"

namespace cvr::model {

using math::ConstSpan;
using math::Matrix;
using math::Vector;

std::vector<TensorRef> EarlyFusionParams::tensors() {
  return {ref("w1", w1), ref("b1", b1), ref("w2", w2), ref("b2", b2)};
}
std::vector<ConstTensorRef> EarlyFusionParams::tensors() const {
  return {ref("w1", w1), ref("b1", b1), ref("w2", w2), ref("b2", b2)};
}

EarlyFusionParams make_early_fusion_params(std::size_t d, std::size_t hidden, bool residual) {
  if (d == 0 || hidden == 0) throw Error(Errc::BadDims, "early fusion needs positive d and hidden");
  EarlyFusionParams p;
  p.d = d;
  p.hidden = hidden;
  p.residual = residual;
  p.w1 = Matrix(hidden, 3 * d);
  p.b1.assign(hidden, 0.0);
  p.w2 = Matrix(d, hidden);
  p.b2.assign(d, 0.0);
  return p;
}

EarlyFusionParams init_early_fusion_params(std::size_t d, std::size_t hidden, bool residual,
                                           std::uint64_t seed) {
  EarlyFusionParams p = make_early_fusion_params(d, hidden, residual);
  Rng rng = make_rng(derive_seed(seed, p.kind()));
  xavier_uniform(p.w1, rng);
  xavier_uniform(p.w2, rng);
  return p;
}

Vector predict(const EarlyFusionParams& p, const PredictorInput& in, const ForwardOptions&,
               EarlyFusionTape* tape) {
  const std::size_t d = p.d;
  if (in.query.size() != d || in.anchor.size() != d) {
    throw Error(Errc::ShapeMismatch, "early fusion input dimension differs from d");
  }
  EarlyFusionTape local;
  EarlyFusionTape& t = tape != nullptr ? *tape : local;
  t.d = d;
  Vector pooled(d, 0.0);
  for (const auto& h : in.history) {
    if (h.size() != d) throw Error(Errc::ShapeMismatch, "history entry dimension differs from d");
    math::add_into(h, pooled);
  }
  if (!in.history.empty()) kernels::scale(1.0 / static_cast<double>(in.history.size()), pooled);
  t.z = math::concat(math::concat(in.query, in.anchor), pooled);
  t.h1 = math::linear_fwd(t.z, p.w1, p.b1);
  t.r1 = math::relu_fwd(t.h1);
  Vector out = math::linear_fwd(t.r1, p.w2, p.b2);
  if (p.residual) math::add_into(in.anchor, out);
  t.out = math::l2_normalize_floor_fwd(out);
  return t.out.y;
}

void backward(const EarlyFusionParams& p, const EarlyFusionTape& t, ConstSpan grad_v_hat,
              EarlyFusionParams& g) {
  if (t.d != p.d || t.out.y.size() != p.d || t.z.size() != 3 * p.d) {
    throw Error(Errc::TapeMismatch, "tape was not produced by a forward pass of these params");
  }
  const Vector g_out = math::l2_normalize_bwd(t.out, grad_v_hat);
  const Vector g_r1 = math::linear_bwd(t.r1, p.w2, g_out, g.w2, g.b2);
  const Vector g_h1 = math::relu_bwd(t.h1, g_r1);
  math::linear_bwd(t.z, p.w1, g_h1, g.w1, g.b1);
}

Checkpoint to_checkpoint(const EarlyFusionParams& p) {
  Checkpoint ckpt;
  ckpt.kind = p.kind();
  ckpt.meta = {{"d", p.d}, {"hidden", p.hidden}};
  write_tensors(p, ckpt);
  return ckpt;
}

EarlyFusionParams early_fusion_from_checkpoint(const Checkpoint& ckpt) {
  bool residual = false;
  if (ckpt.kind == "ef-residual") {
    residual = true;
  } else if (ckpt.kind != "ef-direct") {
    throw Error(Errc::SchemaError, "checkpoint kind '" + ckpt.kind + "' is not early fusion");
  }
  EarlyFusionParams p =
      make_early_fusion_params(ckpt.meta_value("d"), ckpt.meta_value("hidden"), residual);
  read_tensors(ckpt, p.tensors());
  return p;
}

std::vector<TensorRef> LateFusionParams::tensors() {
  return {ref("w1", w1), ref("b1", b1), ref("w2", w2), ref("b2", b2)};
}
std::vector<ConstTensorRef> LateFusionParams::tensors() const {
  return {ref("w1", w1), ref("b1", b1), ref("w2", w2), ref("b2", b2)};
}

LateFusionParams make_late_fusion_params(std::size_t hidden) {
  if (hidden == 0) throw Error(Errc::BadDims, "late fusion needs a positive hidden size");
  LateFusionParams p;
  p.hidden = hidden;
  p.w1 = Matrix(hidden, 2);
  p.b1.assign(hidden, 0.0);
  p.w2 = Matrix(1, hidden);
  p.b2.assign(1, 0.0);
  return p;
}

LateFusionParams init_late_fusion_params(std::size_t hidden, std::uint64_t seed) {
  LateFusionParams p = make_late_fusion_params(hidden);
  Rng rng = make_rng(derive_seed(seed, LateFusionParams::kKind));
  xavier_uniform(p.w1, rng);
  xavier_uniform(p.w2, rng);
  return p;
}

LateFusionParams late_fusion_weighted_sum(std::size_t hidden, double alpha) {
  LateFusionParams p = make_late_fusion_params(hidden);
  p.w1(0, 0) = 1.0;
  p.w1(0, 1) = alpha;
  p.b1[0] = 1.0 + std::abs(alpha);
  p.w2(0, 0) = 1.0;
  return p;
}

double late_fusion_score(const LateFusionParams& p, double a, double b, LateFusionTape* tape) {
  const double x[2] = {a, b};
  Vector h1 = math::linear_fwd(ConstSpan(x, 2), p.w1, p.b1);
  const Vector r1 = math::relu_fwd(h1);
  const double score = math::linear_fwd(r1, p.w2, p.b2)[0];
  if (tape != nullptr) {
    tape->a = a;
    tape->b = b;
    tape->h1 = std::move(h1);
  }
  return score;
}

void late_fusion_backward(const LateFusionParams& p, const LateFusionTape& t, double grad_score,
                          LateFusionParams& g) {
  if (t.h1.size() != p.hidden) throw Error(Errc::TapeMismatch, "late fusion tape shape");
  const Vector r1 = math::relu_fwd(t.h1);
  const double gs[1] = {grad_score};
  const Vector g_r1 = math::linear_bwd(r1, p.w2, ConstSpan(gs, 1), g.w2, g.b2);
  const Vector g_h1 = math::relu_bwd(t.h1, g_r1);
  const double x[2] = {t.a, t.b};
  math::linear_bwd(ConstSpan(x, 2), p.w1, g_h1, g.w1, g.b1);
}

Checkpoint to_checkpoint(const LateFusionParams& p) {
  Checkpoint ckpt;
  ckpt.kind = LateFusionParams::kKind;
  ckpt.meta = {{"hidden", p.hidden}};
  write_tensors(p, ckpt);
  return ckpt;
}

LateFusionParams late_fusion_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != LateFusionParams::kKind) {
    throw Error(Errc::SchemaError, "checkpoint kind '" + ckpt.kind + "' is not 'late-fusion'");
  }
  LateFusionParams p = make_late_fusion_params(ckpt.meta_value("hidden"));
  read_tensors(ckpt, p.tensors());
  return p;
}

}  // namespace cvr::model

#include "cvr/cast.hpp"

#include <cmath>
#include <string>

#include "cvr/error.hpp"
#include "cvr/kernels.hpp"

namespace cvr::model {

using math::ConstSpan;
using math::Matrix;
using math::Vector;

std::vector<TensorRef> CastParams::tensors() {
  return {ref("w1", w1),           ref("b1", b1),          ref("ln1_gamma", ln1_gamma),
          ref("ln1_beta", ln1_beta), ref("w2", w2),        ref("b2", b2),
          ref("wq", wq),           ref("wh", wh),          ref("wo", wo),
          ref("ln2_gamma", ln2_gamma), ref("ln2_beta", ln2_beta), ref("wa", wa),
          ref("ba", ba),           ref("wb", wb),          ref("bb", bb)};
}

std::vector<ConstTensorRef> CastParams::tensors() const {
  return {ref("w1", w1),           ref("b1", b1),          ref("ln1_gamma", ln1_gamma),
          ref("ln1_beta", ln1_beta), ref("w2", w2),        ref("b2", b2),
          ref("wq", wq),           ref("wh", wh),          ref("wo", wo),
          ref("ln2_gamma", ln2_gamma), ref("ln2_beta", ln2_beta), ref("wa", wa),
          ref("ba", ba),           ref("wb", wb),          ref("bb", bb)};
}

CastParams make_cast_params(std::size_t d, std::size_t n_heads, std::size_t context_len) {
  if (d == 0 || n_heads == 0 || d % n_heads != 0) {
    throw Error(Errc::BadDims, "d=" + std::to_string(d) + " is not divisible by n_heads=" +
                                   std::to_string(n_heads));
  }
  CastParams p;
  p.d = d;
  p.n_heads = n_heads;
  p.context_len = context_len;
  p.w1 = Matrix(2 * d, 2 * d);
  p.b1.assign(2 * d, 0.0);
  p.ln1_gamma.assign(2 * d, 1.0);
  p.ln1_beta.assign(2 * d, 0.0);
  p.w2 = Matrix(d, 2 * d);
  p.b2.assign(d, 0.0);
  p.wq = Matrix(d, d);
  p.wh = Matrix(d, d);
  p.wo = Matrix(d, d);
  p.ln2_gamma.assign(d, 1.0);
  p.ln2_beta.assign(d, 0.0);
  p.wa = Matrix(d, d);
  p.ba.assign(d, 0.0);
  p.wb = Matrix(d, d);
  p.bb.assign(d, 0.0);
  return p;
}

CastParams init_cast_params(std::size_t d, std::size_t n_heads, std::size_t context_len,
                            std::uint64_t seed) {
  CastParams p = make_cast_params(d, n_heads, context_len);
  Rng rng = make_rng(derive_seed(seed, "init_cast_params"));
  for (Matrix* w : {&p.w1, &p.w2, &p.wq, &p.wh, &p.wo, &p.wa, &p.wb}) xavier_uniform(*w, rng);
  return p;
}

Vector predict(const CastParams& p, const PredictorInput& in, const ForwardOptions& opt,
               CastTape* tape) {
  const std::size_t d = p.d;
  if (in.query.size() != d || in.anchor.size() != d) {
    throw Error(Errc::ShapeMismatch, "cast input dimension differs from d=" + std::to_string(d));
  }
  if (in.history.size() > p.context_len) {
    throw Error(Errc::HistoryTooLong, std::to_string(in.history.size()) + " > context_len " +
                                          std::to_string(p.context_len));
  }
  for (const auto& h : in.history) {
    if (h.size() != d) throw Error(Errc::ShapeMismatch, "history entry dimension differs from d");
  }
  CastTape local;
  CastTape& t = tape != nullptr ? *tape : local;
  t.d = d;
  t.context_len = p.context_len;

  // instruction-conditioned path
  t.cond_in = math::concat(in.query, in.anchor);
  t.h1 = math::linear_fwd(t.cond_in, p.w1, p.b1);
  t.n1 = math::layer_norm_fwd(t.h1, p.ln1_gamma, p.ln1_beta, &t.ln1);
  Vector r1 = math::relu_fwd(t.n1);
  if (opt.train && opt.dropout_rate > 0.0) {
    if (opt.rng == nullptr) throw Error(Errc::BadSpec, "training forward needs an rng for dropout");
    auto dropped = math::dropout_fwd(r1, opt.dropout_rate, *opt.rng);
    t.dropped = std::move(dropped.y);
    t.dropout_scale = std::move(dropped.scale);
  } else {
    t.dropped = std::move(r1);
    t.dropout_scale.assign(t.dropped.size(), 1.0);
  }
  Vector sum = math::linear_fwd(t.dropped, p.w2, p.b2);
  math::add_into(in.anchor, sum);

  // context path
  t.has_context = !in.history.empty();
  if (t.has_context) {
    const std::size_t len = p.context_len;
    const std::size_t hd = p.head_dim();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    t.padding = len - in.history.size();
    t.history = Matrix(len, d);
    for (std::size_t j = 0; j < in.history.size(); ++j) {
      std::copy(in.history[j].begin(), in.history[j].end(), t.history.row(t.padding + j).begin());
    }
    std::vector<bool> mask(len, false);
    for (std::size_t j = 0; j < t.padding; ++j) mask[j] = true;

    t.query_proj = math::matvec(p.wq, in.query);
    t.keys = Matrix(len, d);
    for (std::size_t j = 0; j < len; ++j) {
      const Vector k = math::matvec(p.wh, t.history.row(j));
      std::copy(k.begin(), k.end(), t.keys.row(j).begin());
    }
    t.probs.assign(p.n_heads, Vector(len, 0.0));
    t.heads_out.assign(d, 0.0);
    Vector logits(len);
    for (std::size_t h = 0; h < p.n_heads; ++h) {
      const ConstSpan qh(t.query_proj.data() + h * hd, hd);
      for (std::size_t j = 0; j < len; ++j) {
        logits[j] = kernels::dot(qh, t.keys.row(j).subspan(h * hd, hd)) * inv_sqrt;
      }
      t.probs[h] = math::stable_softmax(logits, mask);
      math::MutSpan out_h(t.heads_out.data() + h * hd, hd);
      for (std::size_t j = t.padding; j < len; ++j) {
        kernels::axpy(t.probs[h][j], t.keys.row(j).subspan(h * hd, hd), out_h);
      }
    }
    t.attended = math::matvec(p.wo, t.heads_out);
    t.ln2_out = math::layer_norm_fwd(t.attended, p.ln2_gamma, p.ln2_beta, &t.ln2);
    t.m1 = math::linear_fwd(t.ln2_out, p.wa, p.ba);
    t.r2 = math::relu_fwd(t.m1);
    const Vector m2 = math::linear_fwd(t.r2, p.wb, p.bb);
    math::add_into(t.attended, sum);
    math::add_into(m2, sum);
  }

  t.out = math::l2_normalize_floor_fwd(sum);
  return t.out.y;
}

void backward(const CastParams& p, const CastTape& t, ConstSpan grad_v_hat, CastParams& g) {
  const std::size_t d = p.d;
  if (t.d != d || t.context_len != p.context_len || t.out.y.size() != d) {
    throw Error(Errc::TapeMismatch, "tape was not produced by a forward pass of these params");
  }
  if (grad_v_hat.size() != d) throw Error(Errc::ShapeMismatch, "grad_v_hat dimension");

  const Vector g_sum = math::l2_normalize_bwd(t.out, grad_v_hat);

  // conditioned path
  const Vector g_dropped = math::linear_bwd(t.dropped, p.w2, g_sum, g.w2, g.b2);
  const Vector g_r1 = math::dropout_bwd(t.dropout_scale, g_dropped);
  const Vector g_n1 = math::relu_bwd(t.n1, g_r1);
  const Vector g_h1 = math::layer_norm_bwd(t.ln1, p.ln1_gamma, g_n1, g.ln1_gamma, g.ln1_beta);
  math::linear_bwd(t.cond_in, p.w1, g_h1, g.w1, g.b1);

  if (!t.has_context) return;

  // context path: sum += attended + Wb relu(Wa LN(attended) + ba) + bb
  const Vector g_r2 = math::linear_bwd(t.r2, p.wb, g_sum, g.wb, g.bb);
  const Vector g_m1 = math::relu_bwd(t.m1, g_r2);
  const Vector g_ln2 = math::linear_bwd(t.ln2_out, p.wa, g_m1, g.wa, g.ba);
  Vector g_att = math::layer_norm_bwd(t.ln2, p.ln2_gamma, g_ln2, g.ln2_gamma, g.ln2_beta);
  math::add_into(g_sum, g_att);

  const Vector g_heads = math::linear_bwd(t.heads_out, p.wo, g_att, g.wo, {});

  const std::size_t len = t.context_len;
  const std::size_t hd = p.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  Vector g_query_proj(d, 0.0);
  Matrix g_keys(len, d);
  Vector g_probs(len);
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    const ConstSpan g_out_h(g_heads.data() + h * hd, hd);
    const ConstSpan qh(t.query_proj.data() + h * hd, hd);
    const auto& probs = t.probs[h];
    for (std::size_t j = 0; j < len; ++j) {
      g_probs[j] = kernels::dot(g_out_h, t.keys.row(j).subspan(h * hd, hd));
    }
    const Vector g_logits = math::softmax_bwd(probs, g_probs);
    math::MutSpan gq_h(g_query_proj.data() + h * hd, hd);
    for (std::size_t j = t.padding; j < len; ++j) {
      auto gk = g_keys.row(j).subspan(h * hd, hd);
      kernels::axpy(probs[j], g_out_h, gk);  // value path
      kernels::axpy(g_logits[j] * inv_sqrt, qh, gk);  // key path
      kernels::axpy(g_logits[j] * inv_sqrt, t.keys.row(j).subspan(h * hd, hd), gq_h);
    }
  }
  const auto& k = kernels::active();
  k.ger_acc(g_query_proj.data(), t.cond_in.data(), g.wq.data.data(), d, d);  // query = cond_in[0:d]
  for (std::size_t j = t.padding; j < len; ++j) {
    k.ger_acc(g_keys.row(j).data(), t.history.row(j).data(), g.wh.data.data(), d, d);
  }
}

Checkpoint to_checkpoint(const CastParams& p) {
  Checkpoint ckpt;
  ckpt.kind = CastParams::kKind;
  ckpt.meta = {{"d", p.d}, {"n_heads", p.n_heads}, {"context_len", p.context_len}};
  write_tensors(p, ckpt);
  return ckpt;
}

CastParams cast_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != CastParams::kKind) {
    throw Error(Errc::SchemaError, "checkpoint kind '" + ckpt.kind + "' is not 'cast'");
  }
  CastParams p = make_cast_params(ckpt.meta_value("d"), ckpt.meta_value("n_heads"),
                                  ckpt.meta_value("context_len"));
  read_tensors(ckpt, p.tensors());
  return p;
}

}  // namespace cvr::model

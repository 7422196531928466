#include "cvr/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cvr/error.hpp"
#include "cvr/kernels.hpp"

namespace cvr::train {

using math::ConstSpan;
using math::Vector;

LogitLoss infonce_logits(double pos_logit, std::span<const double> neg_logits) {
  double max_logit = pos_logit;
  for (double l : neg_logits) max_logit = std::max(max_logit, l);
  double total = std::exp(pos_logit - max_logit);
  for (double l : neg_logits) total += std::exp(l - max_logit);
  LogitLoss out;
  out.value = max_logit + std::log(total) - pos_logit;
  out.grad_pos = std::exp(pos_logit - max_logit) / total - 1.0;
  out.grad_negs.reserve(neg_logits.size());
  for (double l : neg_logits) out.grad_negs.push_back(std::exp(l - max_logit) / total);
  return out;
}

BatchLoss loss_batch(const std::vector<Vector>& v_hats, const std::vector<ConstSpan>& positives,
                     double tau) {
  const std::size_t n = v_hats.size();
  if (n == 0 || positives.size() != n) {
    throw Error(Errc::ShapeMismatch, "loss_batch needs matching, nonempty prediction/positive sets");
  }
  if (!(tau > 0.0)) throw Error(Errc::BadSpec, "tau must be positive");
  BatchLoss out;
  out.grad_pred.assign(n, Vector(v_hats[0].size(), 0.0));
  std::vector<double> logits(n);
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) logits[j] = math::cosine_sim(v_hats[i], positives[j]) / tau;
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[j] = std::exp(logits[j] - max_logit);
      total += probs[j];
    }
    out.value += max_logit + std::log(total) - logits[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double g_logit = (probs[j] / total - (i == j ? 1.0 : 0.0)) / static_cast<double>(n);
      if (g_logit == 0.0) continue;
      const auto g = math::cosine_sim_bwd(v_hats[i], positives[j], g_logit / tau);
      kernels::axpy(1.0, g.a, out.grad_pred[i]);
    }
  }
  out.value /= static_cast<double>(n);
  return out;
}

LocalLoss loss_local(ConstSpan v_hat, ConstSpan positive, const std::vector<Negative>& negatives,
                     double tau, bool drop_zero_negatives) {
  if (!(tau > 0.0)) throw Error(Errc::BadSpec, "tau must be positive");
  LocalLoss out;
  out.grad_pred.assign(v_hat.size(), 0.0);
  std::vector<const Negative*> used;
  for (const auto& n : negatives) {
    if (n.valid || !drop_zero_negatives) used.push_back(&n);
  }
  if (used.empty()) return out;

  std::vector<double> neg_logits;
  neg_logits.reserve(used.size());
  for (const Negative* n : used) {
    neg_logits.push_back(n->valid ? math::cosine_sim(v_hat, n->embedding) / tau : 0.0);
  }
  const double pos_logit = math::cosine_sim(v_hat, positive) / tau;
  const LogitLoss l = infonce_logits(pos_logit, neg_logits);
  out.value = l.value;
  kernels::axpy(1.0, math::cosine_sim_bwd(v_hat, positive, l.grad_pos / tau).a, out.grad_pred);
  for (std::size_t k = 0; k < used.size(); ++k) {
    if (!used[k]->valid) continue;
    kernels::axpy(1.0, math::cosine_sim_bwd(v_hat, used[k]->embedding, l.grad_negs[k] / tau).a,
                  out.grad_pred);
  }
  return out;
}

TotalLoss loss_total(const std::vector<Vector>& v_hats, const std::vector<ConstSpan>& positives,
                     const std::vector<std::vector<Negative>>& state_negs,
                     const std::vector<std::vector<Negative>>& ident_negs,
                     const LossWeights& w) {
  const std::size_t n = v_hats.size();
  if (state_negs.size() != n || ident_negs.size() != n) {
    throw Error(Errc::ShapeMismatch, "loss_total negative sets do not match the batch");
  }
  BatchLoss batch = loss_batch(v_hats, positives, w.tau);
  TotalLoss out;
  out.batch = batch.value;
  out.grad_pred = std::move(batch.grad_pred);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = loss_state(v_hats[i], positives[i], state_negs[i], w.tau, w.drop_zero_negatives);
    const auto id = loss_ident(v_hats[i], positives[i], ident_negs[i], w.tau, w.drop_zero_negatives);
    out.state += s.value;
    out.ident += id.value;
    kernels::axpy(w.lambda_s * inv_n, s.grad_pred, out.grad_pred[i]);
    kernels::axpy(w.lambda_i * inv_n, id.grad_pred, out.grad_pred[i]);
  }
  out.state *= inv_n;
  out.ident *= inv_n;
  out.total = out.batch + w.lambda_s * out.state + w.lambda_i * out.ident;
  return out;
}

}  // namespace cvr::train

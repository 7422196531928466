#pragma once
// Type-aware contrastive objective: in-batch InfoNCE over positives plus two
// local InfoNCE terms against mined state / identity negatives.

#include <cstddef>
#include <span>
#include <vector>

#include "cvr/math.hpp"

namespace cvr::train {

// -log softmax(pos | {pos} u negs) on raw logits, with its gradients.
struct LogitLoss {
  double value = 0.0;
  double grad_pos = 0.0;
  std::vector<double> grad_negs;
};
LogitLoss infonce_logits(double pos_logit, std::span<const double> neg_logits);

struct BatchLoss {
  double value = 0.0;
  std::vector<math::Vector> grad_pred;  // d loss / d v_hat_i
};
// Mean over rows of -log softmax_j(sim(v_hat_i, pos_j)/tau) at j = i.
BatchLoss loss_batch(const std::vector<math::Vector>& v_hats,
                     const std::vector<math::ConstSpan>& positives, double tau);

// A mined negative. An invalid slot is a zero-vector fallback: its similarity
// is taken as 0, so it adds exp(0) = 1 to the denominator unless dropped.
struct Negative {
  math::ConstSpan embedding;
  bool valid = true;
};

struct LocalLoss {
  double value = 0.0;
  math::Vector grad_pred;
};
// Zero (with zero gradient) when the effective negative set is empty.
LocalLoss loss_local(math::ConstSpan v_hat, math::ConstSpan positive,
                     const std::vector<Negative>& negatives, double tau,
                     bool drop_zero_negatives = false);
inline LocalLoss loss_state(math::ConstSpan v_hat, math::ConstSpan positive,
                            const std::vector<Negative>& negatives, double tau,
                            bool drop_zero_negatives = false) {
  return loss_local(v_hat, positive, negatives, tau, drop_zero_negatives);
}
inline LocalLoss loss_ident(math::ConstSpan v_hat, math::ConstSpan positive,
                            const std::vector<Negative>& negatives, double tau,
                            bool drop_zero_negatives = false) {
  return loss_local(v_hat, positive, negatives, tau, drop_zero_negatives);
}

struct LossWeights {
  double tau = 0.07;
  double lambda_s = 5.0;
  double lambda_i = 1.0;
  bool drop_zero_negatives = false;
};

struct TotalLoss {
  double total = 0.0;
  double batch = 0.0;
  double state = 0.0;  // mean over the batch
  double ident = 0.0;  // mean over the batch
  std::vector<math::Vector> grad_pred;
};
// batch + lambda_s * mean(state) + lambda_i * mean(ident).
TotalLoss loss_total(const std::vector<math::Vector>& v_hats,
                     const std::vector<math::ConstSpan>& positives,
                     const std::vector<std::vector<Negative>>& state_negs,
                     const std::vector<std::vector<Negative>>& ident_negs,
                     const LossWeights& weights);

}  // namespace cvr::train

#include "cvr/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "cvr/error.hpp"
#include "cvr/parallel.hpp"

namespace cvr::train {

using math::ConstSpan;
using math::Vector;

model::PredictorInput TrainingInstance::input() const {
  model::PredictorInput in{query, anchor, {}};
  in.history.reserve(history.size());
  for (const auto& h : history) in.history.emplace_back(h);
  return in;
}

namespace {

std::vector<Negative> as_negatives(const std::vector<Vector>& vecs, const std::vector<bool>& valid) {
  std::vector<Negative> out;
  out.reserve(vecs.size());
  for (std::size_t i = 0; i < vecs.size(); ++i) out.push_back({vecs[i], valid[i]});
  return out;
}

}  // namespace

std::vector<Negative> TrainingInstance::state_negatives() const {
  return as_negatives(state_negs, state_valid);
}
std::vector<Negative> TrainingInstance::ident_negatives() const {
  return as_negatives(ident_negs, ident_valid);
}

std::vector<TrainingInstance> build_training_instances(const data::AnnotationSet& ann,
                                                       const data::EmbeddingStore& clips,
                                                       const data::EmbeddingStore& text,
                                                       const data::EmbeddingStore* captions,
                                                       std::size_t context_len,
                                                       const bench::MiningRules& rules,
                                                       std::size_t workers) {
  const bench::AnnotationIndex index(ann);
  const auto skeletons = bench::build_queries(ann, context_len);
  const std::size_t d = clips.dim();
  const std::size_t budget = rules.max_state + rules.max_ident;
  std::vector<TrainingInstance> out(skeletons.size());

  parallel_for(skeletons.size(), workers, [&](std::size_t i) {
    const auto& q = skeletons[i];
    Rng rng = bench::query_rng(rules.seed, q.query_id);
    const auto state = bench::mine_state_negatives(index, q, budget, rules, rng);
    const auto ident = bench::mine_identity_negatives(index, q, budget, rules, captions, rng);
    const std::size_t take_s = std::min(state.size(), rules.max_state);
    const std::size_t take_i = std::min(ident.size(), rules.max_ident);

    TrainingInstance& inst = out[i];
    inst.query_id = q.query_id;
    const auto qv = text.get(q.query_id);
    inst.query.assign(qv.begin(), qv.end());
    const auto pos = clips.get(q.gt_clip_id);
    inst.positive.assign(pos.begin(), pos.end());
    for (const auto& id : q.context_ids) {
      const auto h = clips.get(id);
      inst.history.emplace_back(h.begin(), h.end());
    }
    inst.has_anchor = !inst.history.empty();
    inst.anchor = inst.has_anchor ? inst.history.back() : Vector(d, 0.0);

    auto fill = [&](std::size_t slots, const std::vector<std::string>& own, std::size_t take_own,
                    const std::vector<std::string>& other, std::size_t take_other,
                    std::vector<Vector>& vecs, std::vector<bool>& valid) {
      std::vector<std::string> ids(own.begin(), own.begin() + static_cast<std::ptrdiff_t>(take_own));
      for (std::size_t k = take_other; k < other.size() && ids.size() < slots; ++k) {
        ids.push_back(other[k]);
      }
      for (const auto& id : ids) {
        const auto e = clips.get(id);
        vecs.emplace_back(e.begin(), e.end());
        valid.push_back(true);
      }
      while (vecs.size() < slots) {
        vecs.emplace_back(d, 0.0);
        valid.push_back(false);
      }
    };
    fill(rules.max_state, state, take_s, ident, take_i, inst.state_negs, inst.state_valid);
    fill(rules.max_ident, ident, take_i, state, take_s, inst.ident_negs, inst.ident_valid);
  });
  return out;
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "cast") return ModelKind::Cast;
  if (name == "ef-direct") return ModelKind::EarlyFusionDirect;
  if (name == "ef-residual") return ModelKind::EarlyFusionResidual;
  if (name == "late-fusion") return ModelKind::LateFusion;
  throw Error(Errc::UsageError, "unknown model kind '" + std::string(name) + "'");
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cast: return "cast";
    case ModelKind::EarlyFusionDirect: return "ef-direct";
    case ModelKind::EarlyFusionResidual: return "ef-residual";
    case ModelKind::LateFusion: return "late-fusion";
  }
  return "?";
}

TrainOptions train_options(const data::RunConfig& cfg) {
  TrainOptions o;
  o.loss = {cfg.tau, cfg.lambda_s, cfg.lambda_i, cfg.drop_zero_negatives};
  o.adamw = {cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.adam_eps};
  o.batch_size = cfg.batch_size;
  o.epochs = cfg.epochs;
  o.seed = cfg.seed;
  o.dropout_rate = cfg.dropout_rate;
  o.workers = cfg.workers;
  return o;
}

std::string loss_curve_csv(const std::vector<EpochStats>& curve) {
  std::string out = "epoch,mean_loss,batch_loss,state_loss,ident_loss\n";
  char line[160];
  for (const auto& e : curve) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.total, e.batch,
                  e.state, e.ident);
    out += line;
  }
  return out;
}

namespace {

constexpr std::size_t kReduceChunk = 8;

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(derive_seed(derive_seed(seed, "epoch_shuffle"), epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void check_inputs(const std::vector<TrainingInstance>& data, const TrainOptions& opt) {
  if (data.empty() && opt.epochs > 0) throw Error(Errc::BadSpec, "no training instances");
  if (opt.batch_size == 0) throw Error(Errc::BadSpec, "batch_size must be positive");
}

// Runs the epoch/batch schedule; step(batch, epoch) performs one optimizer
// step and returns that batch's loss components.
template <class Step>
std::vector<EpochStats> run_schedule(std::size_t n, const TrainOptions& opt, Step&& step) {
  std::vector<EpochStats> curve;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto order = epoch_order(n, opt.seed, epoch);
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::vector<std::size_t> batch(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + opt.batch_size)));
      const TotalLoss loss = step(batch, epoch);
      const double w = static_cast<double>(batch.size());
      stats.total += w * loss.total;
      stats.batch += w * loss.batch;
      stats.state += w * loss.state;
      stats.ident += w * loss.ident;
    }
    const double inv = 1.0 / static_cast<double>(n);
    stats.total *= inv;
    stats.batch *= inv;
    stats.state *= inv;
    stats.ident *= inv;
    curve.push_back(stats);
  }
  return curve;
}

template <class P>
TrainResult<P> train_predictor_impl(P params, const std::vector<TrainingInstance>& data,
                                    const TrainOptions& opt) {
  check_inputs(data, opt);
  OptimizerState state = make_optimizer_state(params, opt.adamw);
  const std::uint64_t dropout_seed = derive_seed(opt.seed, "dropout");

  auto step = [&](const std::vector<std::size_t>& batch, std::size_t epoch) {
    const std::size_t b = batch.size();
    std::vector<Vector> v_hats(b);
    std::vector<typename P::Tape> tapes(b);
    parallel_for(b, opt.workers, [&](std::size_t i) {
      Rng rng = make_rng(derive_seed(derive_seed(dropout_seed, epoch), batch[i]));
      const model::ForwardOptions fwd{true, opt.dropout_rate, &rng};
      v_hats[i] = model::predict(params, data[batch[i]].input(), fwd, &tapes[i]);
    });

    std::vector<ConstSpan> positives;
    std::vector<std::vector<Negative>> state_negs;
    std::vector<std::vector<Negative>> ident_negs;
    for (std::size_t idx : batch) {
      positives.emplace_back(data[idx].positive);
      state_negs.push_back(data[idx].state_negatives());
      ident_negs.push_back(data[idx].ident_negatives());
    }
    TotalLoss loss = loss_total(v_hats, positives, state_negs, ident_negs, opt.loss);

    const std::size_t chunks = (b + kReduceChunk - 1) / kReduceChunk;
    std::vector<P> partial(chunks, model::zeros_like(params));
    parallel_for(chunks, opt.workers, [&](std::size_t c) {
      const std::size_t end = std::min(b, (c + 1) * kReduceChunk);
      for (std::size_t i = c * kReduceChunk; i < end; ++i) {
        model::backward(params, tapes[i], loss.grad_pred[i], partial[c]);
      }
    });
    for (std::size_t c = 1; c < chunks; ++c) model::accumulate(partial[0], partial[c]);
    adamw_step(params, partial[0], state);
    return loss;
  };

  auto curve = run_schedule(data.size(), opt, step);
  return {std::move(params), std::move(curve)};
}

double sim_or_zero(ConstSpan a, ConstSpan b) {
  if (math::norm(a) <= math::kEpsilonNorm || math::norm(b) <= math::kEpsilonNorm) return 0.0;
  return math::cosine_sim(a, b);
}

}  // namespace

TrainResult<model::CastParams> train_predictor(model::CastParams init,
                                               const std::vector<TrainingInstance>& data,
                                               const TrainOptions& opt) {
  return train_predictor_impl(std::move(init), data, opt);
}

TrainResult<model::EarlyFusionParams> train_predictor(model::EarlyFusionParams init,
                                                      const std::vector<TrainingInstance>& data,
                                                      const TrainOptions& opt) {
  return train_predictor_impl(std::move(init), data, opt);
}

TrainResult<model::LateFusionParams> train_late_fusion(model::LateFusionParams params,
                                                       const std::vector<TrainingInstance>& data,
                                                       const TrainOptions& opt) {
  check_inputs(data, opt);
  OptimizerState state = make_optimizer_state(params, opt.adamw);
  const double tau = opt.loss.tau;

  auto step = [&](const std::vector<std::size_t>& batch, std::size_t) {
    const std::size_t b = batch.size();
    model::LateFusionParams grads = model::zeros_like(params);
    TotalLoss loss;
    const double inv_b = 1.0 / static_cast<double>(b);
    model::LateFusionTape tape;

    auto score_of = [&](const TrainingInstance& inst, ConstSpan c, bool valid,
                        model::LateFusionTape* t) {
      const double a = valid ? sim_or_zero(inst.query, c) : 0.0;
      const double bb = valid && inst.has_anchor ? sim_or_zero(inst.anchor, c) : 0.0;
      return model::late_fusion_score(params, a, bb, t);
    };
    // Recomputes the forward for each gradient contribution; the MLP is tiny.
    auto push_grad = [&](const TrainingInstance& inst, ConstSpan c, bool valid, double g) {
      if (g == 0.0) return;
      score_of(inst, c, valid, &tape);
      model::late_fusion_backward(params, tape, g, grads);
    };

    for (std::size_t i = 0; i < b; ++i) {
      const auto& inst = data[batch[i]];
      // in-batch term
      std::vector<double> logits(b);
      for (std::size_t j = 0; j < b; ++j) {
        logits[j] = score_of(inst, data[batch[j]].positive, true, nullptr) / tau;
      }
      std::vector<double> others;
      for (std::size_t j = 0; j < b; ++j) {
        if (j != i) others.push_back(logits[j]);
      }
      const LogitLoss lb = infonce_logits(logits[i], others);
      loss.batch += lb.value * inv_b;
      push_grad(inst, inst.positive, true, lb.grad_pos * inv_b / tau);
      for (std::size_t j = 0, k = 0; j < b; ++j) {
        if (j == i) continue;
        push_grad(inst, data[batch[j]].positive, true, lb.grad_negs[k++] * inv_b / tau);
      }
      // local terms
      auto local = [&](const std::vector<Vector>& negs, const std::vector<bool>& valid,
                       double lambda, double& accum) {
        std::vector<std::size_t> used;
        std::vector<double> neg_logits;
        for (std::size_t k = 0; k < negs.size(); ++k) {
          if (!valid[k] && opt.loss.drop_zero_negatives) continue;
          used.push_back(k);
          neg_logits.push_back(score_of(inst, negs[k], valid[k], nullptr) / tau);
        }
        if (used.empty()) return;
        const double pos_logit = score_of(inst, inst.positive, true, nullptr) / tau;
        const LogitLoss l = infonce_logits(pos_logit, neg_logits);
        accum += l.value * inv_b;
        const double scale = lambda * inv_b / tau;
        push_grad(inst, inst.positive, true, l.grad_pos * scale);
        for (std::size_t k = 0; k < used.size(); ++k) {
          push_grad(inst, negs[used[k]], valid[used[k]], l.grad_negs[k] * scale);
        }
      };
      local(inst.state_negs, inst.state_valid, opt.loss.lambda_s, loss.state);
      local(inst.ident_negs, inst.ident_valid, opt.loss.lambda_i, loss.ident);
    }
    loss.total = loss.batch + opt.loss.lambda_s * loss.state + opt.loss.lambda_i * loss.ident;
    adamw_step(params, grads, state);
    return loss;
  };

  auto curve = run_schedule(data.size(), opt, step);
  return {std::move(params), std::move(curve)};
}

}  // namespace cvr::train
